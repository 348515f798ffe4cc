//! The prescribed-curvature problem: the function `f`, the homotopy
//! family `f^t`, manufactured right-hand sides and the hypothesis checker.

pub mod assumptions;
pub mod expr;

use std::sync::Arc;

use serde::Serialize;

pub use assumptions::{AssumptionCheck, AssumptionReport, CheckStatus};
pub use expr::{parse_f, FExpr, Point, Var};

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, NodeGeometry};
use crate::mesh::{frame_jet, CoordDerivs, ScalarField, SphereMesh};
use crate::par::Execution;
use crate::symmetric::{quotient, round_threshold, QuotientOrder};
use crate::warp::WarpProfile;
use crate::DIM;

/// Target graph `r*` of a manufactured right-hand side.
#[derive(Debug, Clone)]
pub enum TargetShape {
    /// Closed form in `th`, `ph`; curvatures from exact derivatives.
    Expr(FExpr),
    /// Nodal values; curvatures from the discrete operator on that mesh.
    Field(ScalarField),
}

/// `f(r, u) = Q*(u) (lambda(r*(u)) / lambda(r))^(k-l) exp(-pin (r - r*(u)))`
/// with `Q* = sigma_k/sigma_l(mu(eta[r*]))`, so that `r*` solves the
/// equation with this `f`. With `pin = 0`, `lambda^(k-l) f` does not depend
/// on `r`.
#[derive(Debug, Clone)]
pub struct Manufactured {
    target: TargetShape,
    pin: f64,
    derivs: Option<Arc<[FExpr; 5]>>,
    /// `(Q*, r*)` per node for field targets.
    nodal: Option<Arc<Vec<(f64, f64)>>>,
}

impl Manufactured {
    pub fn target(&self) -> &TargetShape {
        &self.target
    }

    pub fn pin(&self) -> f64 {
        self.pin
    }

    /// `(Q*(u), r*(u))` at a point of the sphere.
    pub fn angular(
        &self,
        th: f64,
        ph: f64,
        profile: &WarpProfile,
        q: QuotientOrder,
    ) -> Result<(f64, f64)> {
        match &self.target {
            TargetShape::Field(field) => {
                let node = field.mesh().nearest_node(th, ph);
                Ok(self.nodal.as_ref().expect("nodal cache")[node])
            }
            TargetShape::Expr(e) => {
                let d = self.derivs.as_ref().expect("derivative cache");
                let p = Point {
                    r: 0.0,
                    th,
                    ph,
                    nur: 1.0,
                };
                let value = e.eval(&p);
                let cd = CoordDerivs {
                    t: d[0].eval(&p),
                    p: d[1].eval(&p),
                    tt: d[2].eval(&p),
                    tp: d[3].eval(&p),
                    pp: d[4].eval(&p),
                };
                let jet = frame_jet(value, &cd, th.sin(), th.cos());
                let w = profile.eval(value)?;
                let geom = NodeGeometry::from_jet(&jet, &w, 0.0);
                Ok((quotient(&geom.mu, q)?, value))
            }
        }
    }

    fn value(
        &self,
        r: f64,
        th: f64,
        ph: f64,
        profile: &WarpProfile,
        q: QuotientOrder,
    ) -> Result<f64> {
        let (q_star, r_star) = self.angular(th, ph, profile, q)?;
        radial_factor(q_star, r_star, r, self.pin, profile, q)
    }

    fn uses(&self, v: Var) -> bool {
        match (&self.target, v) {
            (_, Var::R) => true,
            (_, Var::Nur) => false,
            (TargetShape::Expr(e), v) => e.uses(v),
            (TargetShape::Field(f), Var::Ph) => !f.mesh().is_reduced(),
            (TargetShape::Field(_), _) => true,
        }
    }
}

fn radial_factor(
    q_star: f64,
    r_star: f64,
    r: f64,
    pin: f64,
    profile: &WarpProfile,
    q: QuotientOrder,
) -> Result<f64> {
    let ratio = profile.eval(r_star)?.lambda / profile.eval(r)?.lambda;
    Ok(q_star * ratio.powi(q.degree()) * (-pin * (r - r_star)).exp())
}

/// The right-hand side `f(r, u, <nu, d_r>)`.
#[derive(Debug, Clone)]
pub enum Forcing {
    Expr(FExpr),
    /// `threshold(r) exp(alpha (rm - r))`: the graph `r = rm` solves it.
    RoundExponential {
        rm: f64,
        alpha: f64,
    },
    Manufactured(Manufactured),
}

impl Forcing {
    pub fn uses(&self, v: Var) -> bool {
        match self {
            Forcing::Expr(e) => e.uses(v),
            Forcing::RoundExponential { .. } => v == Var::R,
            Forcing::Manufactured(m) => m.uses(v),
        }
    }

    /// Manufactured forcing whose exact solution is the closed-form graph
    /// `target(th, ph)`. Admissibility of the target is checked on `check_mesh`.
    pub fn manufacture_expr(
        target: FExpr,
        profile: &WarpProfile,
        q: QuotientOrder,
        pin: f64,
        check_mesh: &SphereMesh,
    ) -> Result<Self> {
        if target.uses(Var::R) || target.uses(Var::Nur) {
            return Err(Error::InvalidProblem(
                "a target shape may only depend on th and ph".into(),
            ));
        }
        let dt = target.derivative(Var::Th);
        let dp = target.derivative(Var::Ph);
        let derivs = [
            dt.derivative(Var::Th),
            dt.derivative(Var::Ph),
            dp.derivative(Var::Ph),
        ];
        let [tt, tp, pp] = derivs;
        let m = Manufactured {
            target: TargetShape::Expr(target),
            pin,
            derivs: Some(Arc::new([dt, dp, tt, tp, pp])),
            nodal: None,
        };
        for node in 0..check_mesh.len() {
            let (th, ph) = check_mesh.coords(node);
            m.angular(th, ph, profile, q)
                .map_err(|e| admissibility_error(e, node))?;
        }
        Ok(Forcing::Manufactured(m))
    }

    /// Manufactured forcing whose exact discrete solution on `target`'s mesh
    /// is `target` itself.
    pub fn manufacture_field(
        target: ScalarField,
        profile: &WarpProfile,
        q: QuotientOrder,
        pin: f64,
    ) -> Result<Self> {
        let geom = compute_geometry(&target, profile, Execution::default())?;
        let nodal = geom
            .nodes()
            .iter()
            .enumerate()
            .map(|(node, g)| {
                quotient(&g.mu, q)
                    .map(|qs| (qs, g.r))
                    .map_err(|e| admissibility_error(e, node))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Forcing::Manufactured(Manufactured {
            target: TargetShape::Field(target),
            pin,
            derivs: None,
            nodal: Some(Arc::new(nodal)),
        }))
    }
}

fn admissibility_error(e: Error, node: usize) -> Error {
    match e {
        Error::OutsideCone { mu, .. } => Error::NotAdmissible {
            node,
            mu: [mu[0], mu[1]],
        },
        e => e,
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub q: QuotientOrder,
    pub profile: WarpProfile,
    pub forcing: Forcing,
    pub r1: f64,
    pub r2: f64,
    pub phi_rm: f64,
    pub phi_c: f64,
}

/// Plain-data view of a problem for reports.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemSummary {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub r1: f64,
    pub r2: f64,
    pub phi_rm: f64,
    pub phi_c: f64,
}

impl ProblemSpec {
    /// Barrier `phi(r) = exp(c (rm - r))` with `rm = (r1 + r2) / 2`, `c = 1`.
    pub fn new(
        q: QuotientOrder,
        profile: WarpProfile,
        forcing: Forcing,
        r1: f64,
        r2: f64,
    ) -> Result<Self> {
        Self::with_barrier(q, profile, forcing, r1, r2, 0.5 * (r1 + r2), 1.0)
    }

    pub fn with_barrier(
        q: QuotientOrder,
        profile: WarpProfile,
        forcing: Forcing,
        r1: f64,
        r2: f64,
        phi_rm: f64,
        phi_c: f64,
    ) -> Result<Self> {
        let q = q.check_dim(DIM)?;
        let bad = |m: String| Err(Error::InvalidProblem(m));
        if !(r1.is_finite() && r2.is_finite()) {
            return bad("problem.r1 and problem.r2 must be finite".into());
        }
        if r1 >= r2 {
            return bad(format!(
                "problem.r1 = {r1} must be less than problem.r2 = {r2}"
            ));
        }
        let (lo, hi) = profile.domain();
        if r1 <= lo {
            return bad(format!(
                "problem.r1 = {r1} must lie inside the warp domain ({lo}, {hi})"
            ));
        }
        if r2 >= hi {
            return bad(format!(
                "problem.r2 = {r2} must lie inside the warp domain ({lo}, {hi})"
            ));
        }
        if !(phi_rm > r1 && phi_rm < r2) {
            return bad(format!(
                "phi.rm = {phi_rm} must lie strictly between r1 = {r1} and r2 = {r2}"
            ));
        }
        if !(phi_c > 0.0 && phi_c.is_finite()) {
            return bad(format!("phi.c = {phi_c} must be positive"));
        }
        let report = profile.validate();
        if let Some(v) = report.first_violation {
            if v.r > r1 - 0.5 * (r2 - r1) && v.r < r2 + 0.5 * (r2 - r1) {
                return Err(Error::Profile {
                    r: v.r,
                    what: v.what,
                });
            }
        }
        Ok(Self {
            q,
            profile,
            forcing,
            r1,
            r2,
            phi_rm,
            phi_c,
        })
    }

    pub fn n(&self) -> usize {
        DIM
    }

    pub fn summary(&self) -> ProblemSummary {
        ProblemSummary {
            n: DIM,
            k: self.q.k,
            l: self.q.l,
            r1: self.r1,
            r2: self.r2,
            phi_rm: self.phi_rm,
            phi_c: self.phi_c,
        }
    }

    /// `(C_n^k / C_n^l) ((n-1) zeta(r))^(k-l)`.
    pub fn threshold(&self, r: f64) -> Result<f64> {
        Ok(round_threshold(DIM, self.q, self.profile.zeta(r)?))
    }

    pub fn barrier_phi(&self, r: f64) -> f64 {
        (self.phi_c * (self.phi_rm - r)).exp()
    }

    pub fn eval_f(&self, r: f64, th: f64, ph: f64, nur: f64) -> Result<f64> {
        let value = match &self.forcing {
            Forcing::Expr(e) => e.eval(&Point { r, th, ph, nur }),
            Forcing::RoundExponential { rm, alpha } => {
                self.threshold(r)? * (alpha * (rm - r)).exp()
            }
            Forcing::Manufactured(m) => m.value(r, th, ph, &self.profile, self.q)?,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::BadForcing { value, r, th, ph });
        }
        Ok(value)
    }

    /// `f^0 = phi(r) threshold(r)`.
    pub fn f_start(&self, r: f64) -> Result<f64> {
        Ok(self.barrier_phi(r) * self.threshold(r)?)
    }

    /// `f^t = t f + (1 - t) phi(r) threshold(r)`.
    pub fn blend_f_t(&self, t: f64, r: f64, th: f64, ph: f64, nur: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidProblem(format!(
                "homotopy parameter t = {t} outside [0, 1]"
            )));
        }
        let start = if t < 1.0 { self.f_start(r)? } else { 0.0 };
        let end = if t > 0.0 {
            self.eval_f(r, th, ph, nur)?
        } else {
            0.0
        };
        Ok(t * end + (1.0 - t) * start)
    }

    /// Cache of per-node data for repeated evaluation on one mesh.
    pub fn prepare(&self, mesh: &Arc<SphereMesh>) -> Result<PreparedProblem<'_>> {
        let angular = match &self.forcing {
            Forcing::Manufactured(m) => Some(
                (0..mesh.len())
                    .map(|i| {
                        let (th, ph) = mesh.coords(i);
                        m.angular(th, ph, &self.profile, self.q)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(PreparedProblem {
            spec: self,
            mesh: Arc::clone(mesh),
            angular,
        })
    }

    pub fn check_assumptions(&self, samples: usize) -> AssumptionReport {
        assumptions::check(self, samples)
    }
}

/// A problem bound to a mesh.
#[derive(Debug, Clone)]
pub struct PreparedProblem<'a> {
    spec: &'a ProblemSpec,
    mesh: Arc<SphereMesh>,
    angular: Option<Vec<(f64, f64)>>,
}

impl PreparedProblem<'_> {
    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    /// `f^t` at a node for the given radius and `<nu, d_r>`.
    pub fn f_t(&self, t: f64, node: usize, r: f64, nur: f64) -> Result<f64> {
        let spec = self.spec;
        match &self.angular {
            Some(cache) => {
                let Forcing::Manufactured(m) = &spec.forcing else {
                    unreachable!()
                };
                let (q_star, r_star) = cache[node];
                let end = if t > 0.0 {
                    radial_factor(q_star, r_star, r, m.pin, &spec.profile, spec.q)?
                } else {
                    0.0
                };
                let start = if t < 1.0 { spec.f_start(r)? } else { 0.0 };
                if t > 0.0 && !(end > 0.0 && end.is_finite()) {
                    let (th, ph) = self.mesh.coords(node);
                    return Err(Error::BadForcing {
                        value: end,
                        r,
                        th,
                        ph,
                    });
                }
                Ok(t * end + (1.0 - t) * start)
            }
            None => {
                let (th, ph) = self.mesh.coords(node);
                spec.blend_f_t(t, r, th, ph, nur)
            }
        }
    }
}
