//! Warping functions `lambda` for metrics `dr^2 + lambda(r)^2 g'`.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};

/// Polynomial in `r` with ascending coefficients: `c[0] + c[1] r + c[2] r^2 + ...`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
    }

    pub fn derivative(&self) -> Polynomial {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect();
        Polynomial { coeffs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpKind {
    /// `lambda(r) = r`, flat space.
    Euclidean,
    /// `lambda(r) = sin r`, the round sphere.
    Spherical,
    /// `lambda(r) = sinh r`, hyperbolic space.
    Hyperbolic,
    Custom(Polynomial),
}

/// `lambda` together with its first two derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValues {
    pub lambda: f64,
    pub d_lambda: f64,
    pub dd_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpProfile {
    kind: WarpKind,
    /// Open interval `(r_lo, r_hi)`.
    domain: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileViolation {
    pub r: f64,
    pub what: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub samples: usize,
    pub first_violation: Option<ProfileViolation>,
}

impl ProfileReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

impl WarpProfile {
    /// Builds a profile. The domain is only checked for being a non-empty
    /// interval; positivity of `lambda` and `lambda'` is checked by
    /// [`WarpProfile::validate`] and on every evaluation.
    pub fn new(kind: WarpKind, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidProblem(format!(
                "warp domain ({lo}, {hi}) is not an open interval"
            )));
        }
        if let WarpKind::Custom(p) = &kind {
            if p.coeffs().is_empty() || p.coeffs().iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidProblem(
                    "custom warp needs finite polynomial coefficients".into(),
                ));
            }
        }
        Ok(Self { kind, domain })
    }

    pub fn euclidean() -> Self {
        Self {
            kind: WarpKind::Euclidean,
            domain: (0.0, f64::INFINITY),
        }
    }

    pub fn spherical() -> Self {
        Self {
            kind: WarpKind::Spherical,
            domain: (0.0, FRAC_PI_2),
        }
    }

    pub fn hyperbolic() -> Self {
        Self {
            kind: WarpKind::Hyperbolic,
            domain: (0.0, f64::INFINITY),
        }
    }

    pub fn custom(coeffs: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        Self::new(WarpKind::Custom(Polynomial::new(coeffs)), domain)
    }

    pub fn kind(&self) -> &WarpKind {
        &self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Sectional curvature of the ambient space form, if the profile is one.
    pub fn space_form_curvature(&self) -> Option<f64> {
        match self.kind {
            WarpKind::Euclidean => Some(0.0),
            WarpKind::Spherical => Some(1.0),
            WarpKind::Hyperbolic => Some(-1.0),
            WarpKind::Custom(_) => None,
        }
    }

    pub fn contains(&self, r: f64) -> bool {
        r > self.domain.0 && r < self.domain.1
    }

    fn raw(&self, r: f64) -> WarpValues {
        match &self.kind {
            WarpKind::Euclidean => WarpValues {
                lambda: r,
                d_lambda: 1.0,
                dd_lambda: 0.0,
            },
            WarpKind::Spherical => {
                let (s, c) = r.sin_cos();
                WarpValues {
                    lambda: s,
                    d_lambda: c,
                    dd_lambda: -s,
                }
            }
            WarpKind::Hyperbolic => WarpValues {
                lambda: r.sinh(),
                d_lambda: r.cosh(),
                dd_lambda: r.sinh(),
            },
            WarpKind::Custom(p) => {
                let dp = p.derivative();
                WarpValues {
                    lambda: p.eval(r),
                    d_lambda: dp.eval(r),
                    dd_lambda: dp.derivative().eval(r),
                }
            }
        }
    }

    /// `(lambda, lambda', lambda'')` at `r`.
    pub fn eval(&self, r: f64) -> Result<WarpValues> {
        if !self.contains(r) {
            return Err(Error::Domain {
                r,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        let w = self.raw(r);
        if !(w.lambda > 0.0) {
            return Err(Error::Profile {
                r,
                what: "lambda > 0",
            });
        }
        if !(w.d_lambda > 0.0) {
            return Err(Error::Profile {
                r,
                what: "lambda' > 0",
            });
        }
        Ok(w)
    }

    /// `zeta = lambda' / lambda`.
    pub fn zeta(&self, r: f64) -> Result<f64> {
        let w = self.eval(r)?;
        Ok(w.d_lambda / w.lambda)
    }

    /// `Lambda(r) = int_0^r lambda(s) ds`. The lower limit is always 0.
    pub fn capital_lambda(&self, r: f64) -> Result<f64> {
        if !self.contains(r) {
            return Err(Error::Domain {
                r,
                lo: self.domain.0,
                hi: self.domain.1,
            });
        }
        if r < 0.0 {
            return Err(Error::Domain {
                r,
                lo: 0.0,
                hi: self.domain.1,
            });
        }
        Ok(match &self.kind {
            WarpKind::Euclidean => 0.5 * r * r,
            // 1 - cos r, written to avoid cancellation for small r
            WarpKind::Spherical => 2.0 * (0.5 * r).sin().powi(2),
            WarpKind::Hyperbolic => 2.0 * (0.5 * r).sinh().powi(2),
            WarpKind::Custom(p) => adaptive_simpson(&|s| p.eval(s), 0.0, r, 1e-12),
        })
    }

    /// Samples `lambda` and `lambda'` on a dense grid over the domain and
    /// reports the first sample where either is not positive. Unbounded
    /// domains are sampled over a window of length 100.
    pub fn validate(&self) -> ProfileReport {
        const SAMPLES: usize = 10_000;
        let (lo, hi) = self.domain;
        let hi = if hi.is_finite() { hi } else { lo + 100.0 };
        let step = (hi - lo) / SAMPLES as f64;
        let first_violation = (0..SAMPLES).find_map(|i| {
            let r = lo + (i as f64 + 0.5) * step;
            let w = self.raw(r);
            if !(w.lambda > 0.0) {
                Some(ProfileViolation {
                    r,
                    what: "lambda > 0",
                })
            } else if !(w.d_lambda > 0.0) {
                Some(ProfileViolation {
                    r,
                    what: "lambda' > 0",
                })
            } else {
                None
            }
        });
        ProfileReport {
            samples: SAMPLES,
            first_violation,
        }
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    let tol = (rel_tol * whole.abs()).max(f64::MIN_POSITIVE);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn cubic() -> WarpProfile {
        // r + r^3/6
        WarpProfile::custom(vec![0.0, 1.0, 0.0, 1.0 / 6.0], (0.0, 5.0)).unwrap()
    }

    #[test]
    fn eval_examples() {
        let w = WarpProfile::euclidean().eval(1.25).unwrap();
        assert_eq!((w.lambda, w.d_lambda, w.dd_lambda), (1.25, 1.0, 0.0));

        let w = WarpProfile::spherical().eval(FRAC_PI_4).unwrap();
        let h = 2f64.sqrt() / 2.0;
        assert_relative_eq!(w.lambda, h, epsilon = 1e-15);
        assert_relative_eq!(w.d_lambda, h, epsilon = 1e-15);
        assert_relative_eq!(w.dd_lambda, -h, epsilon = 1e-15);

        let w = cubic().eval(1.0).unwrap();
        assert_relative_eq!(w.lambda, 7.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(w.d_lambda, 1.5, epsilon = 1e-15);
        assert_relative_eq!(w.dd_lambda, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(WarpProfile::euclidean().zeta(2.0).unwrap(), 0.5);
        assert_relative_eq!(
            WarpProfile::spherical().zeta(FRAC_PI_4).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        // coth(1) to 20 digits: 1.3130352854993313036
        assert_relative_eq!(
            WarpProfile::hyperbolic().zeta(1.0).unwrap(),
            1.313_035_285_499_331_3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn capital_lambda_examples() {
        assert_eq!(WarpProfile::euclidean().capital_lambda(2.0).unwrap(), 2.0);
        let sph = WarpProfile::new(WarpKind::Spherical, (0.0, PI)).unwrap();
        assert_relative_eq!(sph.capital_lambda(FRAC_PI_2).unwrap(), 1.0, epsilon = 1e-15);
        // exact antiderivative r^2/2 + r^4/24 at r = 1
        assert_relative_eq!(
            cubic().capital_lambda(1.0).unwrap(),
            0.5 + 1.0 / 24.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn custom_quadrature_against_antiderivative() {
        let p = WarpProfile::custom(vec![0.3, 1.0, -0.2, 0.05, 0.01], (0.0, 4.0)).unwrap();
        for r in [0.1_f64, 0.7, 1.9, 3.3] {
            let exact = 0.3 * r + r * r / 2.0 - 0.2 * r.powi(3) / 3.0
                + 0.05 * r.powi(4) / 4.0
                + 0.01 * r.powi(5) / 5.0;
            assert_relative_eq!(p.capital_lambda(r).unwrap(), exact, max_relative = 1e-12);
        }
    }

    #[test]
    fn validate_examples() {
        let e = WarpProfile::new(WarpKind::Euclidean, (0.1, 10.0)).unwrap();
        assert!(e.validate().passed());

        let s = WarpProfile::new(WarpKind::Spherical, (0.1, 3.0)).unwrap();
        let v = s.validate().first_violation.unwrap();
        assert!(v.r >= FRAC_PI_2 && v.what == "lambda' > 0");

        let c = WarpProfile::custom(vec![1.0, -1.0], (0.0, 2.0)).unwrap();
        assert_eq!(c.validate().first_violation.unwrap().what, "lambda' > 0");
    }

    #[test]
    fn builtins_validate_on_their_domains() {
        for p in [
            WarpProfile::euclidean(),
            WarpProfile::spherical(),
            WarpProfile::hyperbolic(),
        ] {
            assert!(p.validate().passed(), "{p:?}");
        }
    }

    #[test]
    fn eval_rejects_outside_domain_and_bad_custom() {
        assert!(matches!(
            WarpProfile::euclidean().eval(-1.0),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            WarpProfile::spherical().eval(2.0),
            Err(Error::Domain { .. })
        ));
        let c = WarpProfile::custom(vec![1.0, -1.0], (0.0, 2.0)).unwrap();
        assert!(matches!(c.eval(0.5), Err(Error::Profile { .. })));
    }

    #[test]
    fn capital_lambda_derivative_is_lambda() {
        let profiles = [
            WarpProfile::euclidean(),
            WarpProfile::spherical(),
            WarpProfile::hyperbolic(),
        ];
        for p in &profiles {
            for i in 1..40 {
                let r = 0.035 * i as f64;
                let h = 1e-5;
                let fd = (p.capital_lambda(r + h).unwrap() - p.capital_lambda(r - h).unwrap())
                    / (2.0 * h);
                let lam = p.eval(r).unwrap().lambda;
                assert_relative_eq!(fd, lam, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn zeta_times_lambda_is_d_lambda() {
        let profiles = [
            WarpProfile::euclidean(),
            WarpProfile::spherical(),
            WarpProfile::hyperbolic(),
            cubic(),
        ];
        for p in &profiles {
            for i in 1..40 {
                let r = 0.037 * i as f64;
                let w = p.eval(r).unwrap();
                assert_relative_eq!(
                    p.zeta(r).unwrap() * w.lambda,
                    w.d_lambda,
                    max_relative = 1e-15
                );
            }
        }
    }
}
