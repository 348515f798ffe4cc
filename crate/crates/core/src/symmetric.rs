//! Elementary symmetric functions and the Hessian quotient operator
//! `G = (sigma_k / sigma_l)^(1/(k-l))` on the Garding cone `Gamma_k`.
//!
//! Indices are zero-based throughout: `sigma_minor(mu, k, 0)` deletes the
//! first entry.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Eigenvalue tuple stored in ascending order, with `perm[i]` the original
/// position of `values[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTuple {
    values: Vec<f64>,
    perm: Vec<usize>,
}

impl EigenTuple {
    pub fn new(mu: &[f64]) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::Index(format!(
                "eigen tuple needs n >= 2, got {}",
                mu.len()
            )));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::Index("eigen tuple has non-finite entries".into()));
        }
        let mut perm: Vec<usize> = (0..mu.len()).collect();
        perm.sort_by(|&a, &b| mu[a].total_cmp(&mu[b]));
        let values = perm.iter().map(|&i| mu[i]).collect();
        Ok(Self { values, perm })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Sorted ascending.
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Entries in the order they were given.
    pub fn original_order(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for (v, &p) in self.values.iter().zip(&self.perm) {
            out[p] = *v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuotientOrder {
    pub k: usize,
    pub l: usize,
}

impl QuotientOrder {
    /// Requires `k >= 2` and `l <= k - 2`; use [`QuotientOrder::check_dim`]
    /// for the upper bound `k <= n`.
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k < 2 || l + 2 > k {
            return Err(Error::QuotientOrder { k, l, n: 0 });
        }
        Ok(Self { k, l })
    }

    pub fn check_dim(self, n: usize) -> Result<Self> {
        if self.k > n {
            return Err(Error::QuotientOrder {
                k: self.k,
                l: self.l,
                n,
            });
        }
        Ok(self)
    }

    pub fn degree(self) -> i32 {
        (self.k - self.l) as i32
    }
}

/// `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `[sigma_0, ..., sigma_n]`, expanding one variable at a time.
pub fn elementary_all(mu: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; mu.len() + 1];
    e[0] = 1.0;
    for (m, &x) in mu.iter().enumerate() {
        for j in (1..=m + 1).rev() {
            e[j] += x * e[j - 1];
        }
    }
    e
}

fn elementary_without(mu: &[f64], i: usize) -> Vec<f64> {
    let mut e = vec![0.0; mu.len()];
    e[0] = 1.0;
    let mut m = 0;
    for (idx, &x) in mu.iter().enumerate() {
        if idx == i {
            continue;
        }
        for j in (1..=m + 1).rev() {
            e[j] += x * e[j - 1];
        }
        m += 1;
    }
    e
}

pub fn sigma(mu: &[f64], k: usize) -> Result<f64> {
    if k > mu.len() {
        return Err(Error::Index(format!("sigma_{k} with n = {}", mu.len())));
    }
    Ok(elementary_all(mu)[k])
}

/// `sigma_k(mu | i)`, the `k`-th elementary function with entry `i` deleted.
pub fn sigma_minor(mu: &[f64], k: usize, i: usize) -> Result<f64> {
    let n = mu.len();
    if i >= n {
        return Err(Error::Index(format!("minor index {i} with n = {n}")));
    }
    if k + 1 > n {
        return Err(Error::Index(format!("sigma_{k}(mu|i) with n = {n}")));
    }
    Ok(elementary_without(mu, i)[k])
}

/// `sigma_1 .. sigma_k` all positive.
pub fn in_gamma_k(mu: &[f64], k: usize) -> bool {
    if k == 0 || k > mu.len() {
        return false;
    }
    elementary_all(mu)[1..=k].iter().all(|&s| s > 0.0)
}

fn require_cone(mu: &[f64], k: usize) -> Result<Vec<f64>> {
    let e = elementary_all(mu);
    if k == 0 || k > mu.len() || e[1..=k].iter().any(|&s| !(s > 0.0)) {
        return Err(Error::OutsideCone { mu: mu.to_vec(), k });
    }
    Ok(e)
}

/// `sigma_k / sigma_l`.
pub fn quotient(mu: &[f64], q: QuotientOrder) -> Result<f64> {
    let e = require_cone(mu, q.k)?;
    Ok(e[q.k] / e[q.l])
}

/// `G = (sigma_k / sigma_l)^(1/(k-l))`.
pub fn g_value(mu: &[f64], q: QuotientOrder) -> Result<f64> {
    Ok(quotient(mu, q)?.powf(1.0 / f64::from(q.degree())))
}

/// Diagonal derivatives `G^{ii}` at the diagonal matrix with entries `mu`.
pub fn g_gradient_diag(mu: &[f64], q: QuotientOrder) -> Result<Vec<f64>> {
    let e = require_cone(mu, q.k)?;
    let (sk, sl) = (e[q.k], e[q.l]);
    let deg = f64::from(q.degree());
    let prefactor = (sk / sl).powf(1.0 / deg - 1.0) / deg;
    Ok((0..mu.len())
        .map(|i| {
            let minor = elementary_without(mu, i);
            let sk1 = minor[q.k - 1];
            let sl1 = if q.l == 0 { 0.0 } else { minor[q.l - 1] };
            prefactor * (sk1 * sl - sk * sl1) / (sl * sl)
        })
        .collect())
}

/// `F^{ii} = sum_{j != i} G^{jj}`.
pub fn f_coeffs(g_grad: &[f64]) -> Vec<f64> {
    let total: f64 = g_grad.iter().sum();
    g_grad.iter().map(|g| total - g).collect()
}

/// `(C_n^k / C_n^l) ((n-1) zeta)^(k-l)`, the value of `sigma_k/sigma_l` on a
/// slice `r = const` where every `mu_i = (n-1) zeta`.
pub fn round_threshold(n: usize, q: QuotientOrder, zeta: f64) -> f64 {
    binomial(n, q.k) / binomial(n, q.l) * ((n - 1) as f64 * zeta).powi(q.degree())
}

/// Lower bound `(C_n^k / C_n^l)^(1/(k-l))` for `sum_i G^{ii}`.
pub fn trace_lower_bound(n: usize, q: QuotientOrder) -> f64 {
    (binomial(n, q.k) / binomial(n, q.l)).powf(1.0 / f64::from(q.degree()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SecondDerivativeCheck {
    /// `|-G^{1i,i1} - (G^{11} - G^{ii}) / (eta_ii - eta_11)|`.
    Residual(f64),
    DegeneratePair,
    /// The identity is only claimed for `k >= 3`.
    NotApplicable,
}

const TIE_TOLERANCE: f64 = 1e-8;

/// Checks the off-diagonal second derivative identity
/// `-G^{1i,i1} = (G^{11} - G^{ii}) / (eta_ii - eta_11)` at a diagonal `eta`.
///
/// The left side is estimated independently: the `(0,i)` and `(i,0)` entries
/// are perturbed by `eps`, the 2x2 block is re-diagonalised in closed form and
/// `d^2/d eps^2 G = 2 G^{1i,i1}` is taken by Richardson-extrapolated central
/// differences.
pub fn check_second_derivative_identity(
    eta: &[f64],
    q: QuotientOrder,
    i: usize,
) -> Result<SecondDerivativeCheck> {
    let n = eta.len();
    if i == 0 || i >= n {
        return Err(Error::Index(format!(
            "check_second_derivative_identity index {i} with n = {n}"
        )));
    }
    if q.k < 3 {
        return Ok(SecondDerivativeCheck::NotApplicable);
    }
    q.check_dim(n)?;
    let g0 = g_value(eta, q)?;
    let gap = eta[i] - eta[0];
    if gap.abs() < TIE_TOLERANCE {
        return Ok(SecondDerivativeCheck::DegeneratePair);
    }
    let grad = g_gradient_diag(eta, q)?;
    let scale = 1.0 + eta.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let eps = (1e-4 * scale).min(0.1 * gap.abs());

    let perturbed = |e: f64| -> Result<f64> {
        let (a, b) = (eta[0], eta[i]);
        let mid = 0.5 * (a + b);
        let rad = (0.25 * (a - b) * (a - b) + e * e).sqrt();
        let mut m = eta.to_vec();
        m[0] = mid - rad;
        m[i] = mid + rad;
        g_value(&m, q)
    };
    // G(eps) is even in eps, so the central stencil reduces to 2(G(eps) - G(0)) / eps^2.
    let second = |e: f64| -> Result<f64> { Ok(2.0 * (perturbed(e)? - g0) / (e * e)) };
    let d2 = (4.0 * second(0.5 * eps)? - second(eps)?) / 3.0;
    let mixed = 0.5 * d2;
    let rhs = (grad[0] - grad[i]) / gap;
    Ok(SecondDerivativeCheck::Residual((-mixed - rhs).abs()))
}

/// Second derivative of `s -> G(mu + s d)` at `s = 0` by central differences,
/// shrinking the step until the stencil stays inside `Gamma_k`.
pub fn second_directional_derivative(mu: &[f64], q: QuotientOrder, dir: &[f64]) -> Result<f64> {
    if dir.len() != mu.len() {
        return Err(Error::Index("direction length differs from n".into()));
    }
    let g0 = g_value(mu, q)?;
    let scale = 1.0 + mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut h = 1e-4 * scale;
    let shifted = |s: f64| -> Vec<f64> { mu.iter().zip(dir).map(|(m, d)| m + s * d).collect() };
    for _ in 0..30 {
        let plus = shifted(h);
        let minus = shifted(-h);
        if in_gamma_k(&plus, q.k) && in_gamma_k(&minus, q.k) {
            return Ok((g_value(&plus, q)? - 2.0 * g0 + g_value(&minus, q)?) / (h * h));
        }
        h *= 0.5;
    }
    Err(Error::StencilLeavesCone(format!(
        "{mu:?} is too close to the boundary of Gamma_{}",
        q.k
    )))
}

/// Largest second directional derivative of `G` over `trials` random unit
/// diagonal directions. Concavity means this is `<= 0` up to round-off.
pub fn check_concavity<R: Rng + ?Sized>(
    mu: &[f64],
    q: QuotientOrder,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    require_cone(mu, q.k)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut d: Vec<f64> = (0..mu.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        d.iter_mut().for_each(|x| *x /= norm);
        worst = worst.max(second_directional_derivative(mu, q, &d)?);
    }
    Ok(worst)
}
