//! Seeded property suite over the symmetric-function layer and the
//! constant-graph geometry, run by the `selftest` subcommand.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::Result;
use crate::geometry::compute_geometry;
use crate::mesh::{ScalarField, SphereMesh};
use crate::par::Execution;
use crate::symmetric::{
    check_concavity, check_second_derivative_identity, elementary_all, g_gradient_diag, g_value,
    in_gamma_k, quotient, round_threshold, sigma, sigma_minor, trace_lower_bound, QuotientOrder,
    SecondDerivativeCheck,
};
use crate::warp::WarpProfile;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub samples: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub properties: Vec<PropertyResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            let tag = if p.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!(
                "[{tag}] {:<28} samples {:>6}  worst {:>12.4e}  tol {:>9.1e}\n",
                p.name, p.samples, p.worst, p.tolerance
            ));
            if let Some(e) = &p.error {
                s.push_str(&format!("       error: {e}\n"));
            }
        }
        s
    }
}

/// Sum over all `k`-subsets, by explicit enumeration. Also returns the sum of
/// absolute values of the products, the natural scale for rounding error.
pub fn brute_force_sigma(mu: &[f64], k: usize) -> (f64, f64) {
    let n = mu.len();
    let (mut sum, mut abs) = (0.0, 0.0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let p: f64 = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| mu[i])
            .product();
        sum += p;
        abs += p.abs();
    }
    (sum, abs)
}

/// Distance along the diagonal `(1, .., 1)` kept between sampled points and
/// the boundary of `Gamma_k`.
pub const CONE_MARGIN: f64 = 0.1;

/// Uniform draw in `[-1, 2]^n`, shifted up along the diagonal until
/// `mu - CONE_MARGIN (1, .., 1)` lies in `Gamma_k`.
pub fn random_cone_point<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<f64> {
    let mut mu: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
    let inner = |mu: &[f64]| mu.iter().map(|x| x - CONE_MARGIN).collect::<Vec<_>>();
    while !in_gamma_k(&inner(&mu), k) {
        mu.iter_mut().for_each(|x| *x += 0.25);
    }
    mu
}

fn orders(n: usize) -> Vec<QuotientOrder> {
    (2..=n)
        .flat_map(|k| (0..=k - 2).filter_map(move |l| QuotientOrder::new(k, l).ok()))
        .collect()
}

struct Acc {
    res: PropertyResult,
}

impl Acc {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            res: PropertyResult {
                name,
                samples: 0,
                worst: 0.0,
                tolerance,
                passed: true,
                error: None,
            },
        }
    }

    /// Records a quantity that must stay `<= tolerance`.
    fn push(&mut self, v: Result<f64>) {
        self.res.samples += 1;
        match v {
            Ok(v) if v.is_nan() => self.fail("NaN".into()),
            Ok(v) => self.res.worst = self.res.worst.max(v),
            Err(e) => self.fail(e.to_string()),
        }
    }

    fn fail(&mut self, msg: String) {
        self.res.worst = f64::INFINITY;
        self.res.error.get_or_insert(msg);
    }

    fn finish(mut self) -> PropertyResult {
        self.res.passed = self.res.error.is_none() && self.res.worst <= self.res.tolerance;
        self.res
    }
}

/// Runs every property with the given seed.
pub fn run(seed: u64) -> SelftestReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let properties = vec![
        sigma_vs_brute_force(&mut rng),
        minor_identity(&mut rng),
        euler_identity(&mut rng),
        gradient_vs_fd(&mut rng),
        trace_bound(&mut rng),
        second_derivative_identity(&mut rng),
        concavity(&mut rng),
        homogeneity(&mut rng),
        gradient_ordering(&mut rng),
        constant_graph_identity(),
    ];
    SelftestReport { seed, properties }
}

fn sigma_vs_brute_force(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("sigma-vs-brute-force", 1e-12);
    for n in 1..=8 {
        for _ in 0..20 {
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for k in 0..=n {
                let (b, scale) = brute_force_sigma(&mu, k);
                acc.push(sigma(&mu, k).map(|s| (s - b).abs() / scale.max(f64::MIN_POSITIVE)));
            }
        }
    }
    acc.finish()
}

fn minor_identity(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("minor-identity", 1e-12);
    for n in 2..=6 {
        for _ in 0..10 {
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for k in 1..=n {
                for i in 0..n {
                    acc.push((|| {
                        let lhs = sigma(&mu, k)?;
                        let without = if k < n { sigma_minor(&mu, k, i)? } else { 0.0 };
                        let rhs = without + mu[i] * sigma_minor(&mu, k - 1, i)?;
                        let (_, scale) = brute_force_sigma(&mu, k);
                        Ok((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE))
                    })());
                }
            }
        }
    }
    acc.finish()
}

fn euler_identity(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("euler-identity", 1e-6);
    for n in 2..=6 {
        for _ in 0..10 {
            let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for k in 1..=n {
                acc.push((|| {
                    let mut sum = 0.0;
                    for i in 0..n {
                        let h = 1e-6 * (1.0 + mu[i].abs());
                        let mut p = mu.clone();
                        p[i] += h;
                        let up = sigma(&p, k)?;
                        p[i] -= 2.0 * h;
                        let down = sigma(&p, k)?;
                        sum += mu[i] * (up - down) / (2.0 * h);
                    }
                    let (s, scale) = brute_force_sigma(&mu, k);
                    Ok((sum - k as f64 * s).abs() / scale.max(1.0))
                })());
            }
        }
    }
    acc.finish()
}

/// Central-difference gradient of `G`, step `1e-6 (1 + |mu_i|)`.
pub fn fd_gradient(mu: &[f64], q: QuotientOrder) -> Result<Vec<f64>> {
    (0..mu.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + mu[i].abs());
            let mut p = mu.to_vec();
            p[i] += h;
            let up = g_value(&p, q)?;
            p[i] -= 2.0 * h;
            let down = g_value(&p, q)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

fn gradient_vs_fd(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("gradient-vs-fd", 1e-6);
    let cases: Vec<(usize, QuotientOrder)> = (2..=5)
        .flat_map(|n| orders(n).into_iter().map(move |q| (n, q)))
        .collect();
    for s in 0..100 {
        let (n, q) = cases[s % cases.len()];
        let mu = random_cone_point(rng, n, q.k);
        acc.push((|| {
            let exact = g_gradient_diag(&mu, q)?;
            let fd = fd_gradient(&mu, q)?;
            let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok(exact
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
                / scale)
        })());
    }
    acc.finish()
}

fn trace_bound(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("trace-lower-bound", 1e-10);
    for n in 2..=8 {
        for q in orders(n) {
            for _ in 0..20 {
                let mu = random_cone_point(rng, n, q.k);
                acc.push(
                    g_gradient_diag(&mu, q)
                        .map(|g| trace_lower_bound(n, q) - g.iter().sum::<f64>()),
                );
            }
        }
    }
    acc.finish()
}

fn second_derivative_identity(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("second-derivative-identity", 1e-5);
    let cases: Vec<(usize, QuotientOrder)> = (3..=6)
        .flat_map(|n| {
            orders(n)
                .into_iter()
                .filter(|q| q.k >= 3)
                .map(move |q| (n, q))
        })
        .collect();
    let mut done = 0;
    while done < 50 {
        let (n, q) = cases[done % cases.len()];
        let eta = random_cone_point(rng, n, q.k);
        let i = rng.random_range(1..n);
        if (eta[i] - eta[0]).abs() < 0.05 {
            continue;
        }
        done += 1;
        acc.push(
            check_second_derivative_identity(&eta, q, i).and_then(|c| match c {
                SecondDerivativeCheck::Residual(r) => Ok(r),
                other => Err(crate::Error::Unsupported(format!("unexpected {other:?}"))),
            }),
        );
    }
    acc.finish()
}

fn concavity(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("concavity", 1e-6);
    let cases: Vec<(usize, QuotientOrder)> = (2..=6)
        .flat_map(|n| orders(n).into_iter().map(move |q| (n, q)))
        .collect();
    for s in 0..100 {
        let (n, q) = cases[s % cases.len()];
        let mu = random_cone_point(rng, n, q.k);
        acc.push(check_concavity(&mu, q, 4, rng));
    }
    acc.finish()
}

fn homogeneity(rng: &mut StdRng) -> PropertyResult {
    let mut acc = Acc::new("one-homogeneity", 1e-12);
    for n in 2..=6 {
        for q in orders(n) {
            let mu = random_cone_point(rng, n, q.k);
            let c = rng.random_range(0.1..10.0);
            let scaled: Vec<f64> = mu.iter().map(|x| c * x).collect();
            acc.push((|| {
                Ok(((g_value(&scaled, q)? - c * g_value(&mu, q)?) / (c * g_value(&mu, q)?)).abs())
            })());
        }
    }
    acc.finish()
}

fn gradient_ordering(rng: &mut StdRng) -> PropertyResult {
    // worst violation of G^{ii} >= G^{jj} for mu_i <= mu_j, relative to max G^{ii}
    let mut acc = Acc::new("gradient-ordering", 1e-12);
    for n in 2..=6 {
        for q in orders(n) {
            let mut mu = random_cone_point(rng, n, q.k);
            mu.sort_by(f64::total_cmp);
            acc.push(g_gradient_diag(&mu, q).map(|g| {
                let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                g.windows(2)
                    .map(|w| (w[1] - w[0]) / scale)
                    .fold(0.0, f64::max)
            }));
        }
    }
    acc.finish()
}

/// At `r = c` every `mu_i = (n-1) zeta(c)`, so the operator equals the round
/// threshold. Checked on a coarse mesh for every built-in profile.
pub fn constant_graph_residual(profile: &WarpProfile, c: f64, q: QuotientOrder) -> Result<f64> {
    let mesh = SphereMesh::build(16, 8, false)?;
    let r = ScalarField::constant(mesh, c);
    let geom = compute_geometry(&r, profile, Execution::Serial)?;
    let expected = round_threshold(crate::DIM, q, profile.zeta(c)?);
    let mut worst: f64 = 0.0;
    for node in geom.nodes() {
        worst = worst.max(((quotient(&node.mu, q)? - expected) / expected).abs());
    }
    Ok(worst)
}

fn constant_graph_identity() -> PropertyResult {
    let mut acc = Acc::new("constant-graph-identity", 1e-10);
    let q = QuotientOrder::new(2, 0).expect("k = 2, l = 0 is valid");
    let profiles = [
        (WarpProfile::euclidean(), vec![0.3, 1.0, 2.5]),
        (WarpProfile::spherical(), vec![0.3, 0.8, 1.4]),
        (WarpProfile::hyperbolic(), vec![0.3, 1.0, 2.5]),
    ];
    for (p, cs) in &profiles {
        for &c in cs {
            acc.push(constant_graph_residual(p, c, q));
        }
    }
    acc.finish()
}

/// `sigma_k` on integer tuples, where every product is exact in `f64`.
pub fn integer_sigma_mismatches(n_max: usize) -> usize {
    let mut bad = 0;
    for n in 1..=n_max {
        let mu: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect();
        let e = elementary_all(&mu);
        for (k, ek) in e.iter().enumerate() {
            if *ek != brute_force_sigma(&mu, k).0 {
                bad += 1;
            }
        }
    }
    bad
}
