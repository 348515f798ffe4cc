//! Quantities controlled by the a priori estimates, evaluated on a graph:
//! the radial barrier, the support function, the gradient, the largest
//! curvature and the auxiliary test functions
//!
//! * `Phi = -ln tau + alpha / s`, `s = Lambda(r)` (or `r`, configurable),
//! * `P = ln kappa_max - ln(tau - a) + A Lambda(r)`, `a = min(tau) / 2`.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{compute_geometry, GraphGeometry, NodeGeometry};
use crate::mesh::{Resolution, SphereMesh};
use crate::problem::ProblemSpec;
use crate::solver::{continuation_solve, SolverOptions};

/// Argument of `gamma(s) = alpha / s` in the gradient test function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaArg {
    #[default]
    CapitalLambda,
    Radius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorParams {
    pub alpha: f64,
    /// Coefficient `A` of `Lambda` in `P`.
    pub big_a: f64,
    pub gamma_arg: GammaArg,
}

impl Default for MonitorParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            big_a: 1.0,
            gamma_arg: GammaArg::CapitalLambda,
        }
    }
}

/// Maximum of a nodal function and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeMax {
    pub value: f64,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub tau_min: f64,
    pub v_max: f64,
    pub grad_max: f64,
    pub kappa_max: f64,
    pub mu_min: f64,
    pub phi_test_max: NodeMax,
    pub p_test_max: NodeMax,
    /// `a = min(tau) / 2`.
    pub a: f64,
    /// `r1 < r_min` and `r_max < r2`.
    pub barrier_ok: bool,
}

fn argmax(values: impl Iterator<Item = f64>) -> NodeMax {
    values.enumerate().fold(
        NodeMax {
            value: f64::NEG_INFINITY,
            node: 0,
        },
        |best, (i, v)| {
            if v > best.value {
                NodeMax { value: v, node: i }
            } else {
                best
            }
        },
    )
}

/// `ln kappa_max - ln(tau - a) + A Lambda` at one node.
pub fn p_test(n: &NodeGeometry, a: f64, big_a: f64) -> f64 {
    let k = n.kappa[0];
    if !(k > 0.0) || !(n.tau > a) {
        return f64::NEG_INFINITY;
    }
    k.ln() - (n.tau - a).ln() + big_a * n.capital_lambda
}

pub fn phi_test(n: &NodeGeometry, alpha: f64, arg: GammaArg) -> f64 {
    let s = match arg {
        GammaArg::CapitalLambda => n.capital_lambda,
        GammaArg::Radius => n.r,
    };
    -n.tau.ln() + alpha / s
}

pub fn monitor(
    geom: &GraphGeometry,
    spec: &ProblemSpec,
    t: f64,
    params: &MonitorParams,
) -> MonitorRecord {
    let nodes = geom.nodes();
    let min = |f: fn(&NodeGeometry) -> f64| nodes.iter().map(f).fold(f64::INFINITY, f64::min);
    let max = |f: fn(&NodeGeometry) -> f64| nodes.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let r_min = min(|n| n.r);
    let r_max = max(|n| n.r);
    let tau_min = min(|n| n.tau);
    let a = 0.5 * tau_min;
    MonitorRecord {
        t,
        r_min,
        r_max,
        tau_min,
        v_max: max(|n| n.v),
        grad_max: max(NodeGeometry::grad_norm),
        kappa_max: max(|n| n.kappa[0]),
        mu_min: min(|n| n.mu[0].min(n.mu[1])),
        phi_test_max: argmax(
            nodes
                .iter()
                .map(|n| phi_test(n, params.alpha, params.gamma_arg)),
        ),
        p_test_max: argmax(nodes.iter().map(|n| p_test(n, a, params.big_a))),
        a,
        barrier_ok: spec.r1 < r_min && r_max < spec.r2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub resolution: Resolution,
    pub tau_min: f64,
    pub grad_max: f64,
    pub kappa_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityTable {
    pub rows: Vec<StabilityRow>,
    /// `|kappa_max(i+1) - kappa_max(i)| / |kappa_max(i+1)|` for consecutive rows.
    pub kappa_changes: Vec<f64>,
    /// Set when the finest change exceeds 1% without contracting.
    pub unstable: bool,
}

/// Relative change above which the finest pair flags instability.
pub const STABILITY_TOL: f64 = 0.01;

impl StabilityTable {
    pub fn from_rows(rows: Vec<StabilityRow>) -> Self {
        let kappa_changes: Vec<f64> = rows
            .windows(2)
            .map(|w| ((w[1].kappa_max - w[0].kappa_max) / w[1].kappa_max).abs())
            .collect();
        let unstable = match kappa_changes.as_slice() {
            [] => false,
            [only] => *only > STABILITY_TOL,
            [.., prev, last] => *last > STABILITY_TOL && last >= prev,
        };
        Self {
            rows,
            kappa_changes,
            unstable,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>16} {:>16} {:>16}",
            "n_theta", "n_phi", "tau_min", "grad_max", "kappa_max"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>8} {:>8} {:>16.10} {:>16.10} {:>16.10}",
                r.resolution.n_theta, r.resolution.n_phi, r.tau_min, r.grad_max, r.kappa_max
            );
        }
        if let Some(last) = self.kappa_changes.last() {
            let _ = writeln!(s, "finest relative kappa_max change: {last:.3e}");
        }
        if self.unstable {
            let _ = writeln!(
                s,
                "estimate instability: kappa_max does not settle under refinement"
            );
        }
        s
    }
}

/// Solves at each resolution and tabulates the estimated quantities at `t = 1`.
pub fn refinement_stability(
    spec_for: impl Fn(&Arc<SphereMesh>) -> Result<ProblemSpec>,
    resolutions: &[Resolution],
    opts: &SolverOptions,
) -> Result<StabilityTable> {
    let mut rows = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let mesh = res.build()?;
        let spec = spec_for(&mesh)?;
        let run = continuation_solve(&spec, &mesh, opts)?;
        if !run.converged() {
            return Err(Error::Resolution(format!(
                "continuation did not reach t = 1 at {}x{}: {:?}",
                res.n_theta, res.n_phi, run.status
            )));
        }
        let geom = compute_geometry(&run.last().r, &spec.profile, opts.exec)?;
        let rec = monitor(&geom, &spec, 1.0, &MonitorParams::default());
        rows.push(StabilityRow {
            resolution: res,
            tau_min: rec.tau_min,
            grad_max: rec.grad_max,
            kappa_max: rec.kappa_max,
        });
    }
    Ok(StabilityTable::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ScalarField;
    use crate::par::Execution;
    use crate::problem::{parse_f, Forcing};
    use crate::symmetric::QuotientOrder;
    use crate::warp::WarpProfile;
    use approx::assert_abs_diff_eq;

    fn spec() -> ProblemSpec {
        let q = QuotientOrder::new(2, 0).unwrap();
        let f = Forcing::Expr(parse_f("1/r^2 * exp(1.25 - r)").unwrap());
        ProblemSpec::new(q, WarpProfile::euclidean(), f, 0.5, 2.0).unwrap()
    }

    fn record(f: impl Fn(f64, f64) -> f64, reduced: bool, params: &MonitorParams) -> MonitorRecord {
        let mesh = if reduced {
            SphereMesh::build(128, 0, true)
        } else {
            SphereMesh::build(16, 32, false)
        }
        .unwrap();
        let r = ScalarField::from_fn(mesh, f).unwrap();
        let g = compute_geometry(&r, &WarpProfile::euclidean(), Execution::Serial).unwrap();
        monitor(&g, &spec(), 0.5, params)
    }

    #[test]
    fn round_graph() {
        let rho = 1.3;
        let rec = record(|_, _| rho, false, &MonitorParams::default());
        assert_abs_diff_eq!(rec.tau_min, rho, epsilon = 1e-14);
        assert_eq!(rec.grad_max, 0.0);
        assert_abs_diff_eq!(rec.kappa_max, 1.0 / rho, epsilon = 1e-14);
        assert_abs_diff_eq!(rec.mu_min, 1.0 / rho, epsilon = 1e-14);
        assert!(rec.barrier_ok);
        assert!(rec.a < rec.tau_min && rec.p_test_max.value.is_finite());
    }

    #[test]
    fn perturbed_graph_curvature_bound() {
        let rec = record(|t, _| 1.0 + 0.05 * t.cos(), true, &MonitorParams::default());
        assert!((0.9..=1.2).contains(&rec.kappa_max), "{}", rec.kappa_max);
        assert!(rec.mu_min > 0.0);
        assert!(rec.tau_min * rec.v_max >= (rec.r_min * rec.r_min) / 1.05);
    }

    #[test]
    fn p_argmax_tracks_curvature_over_tau() {
        let mesh = SphereMesh::build(16, 32, false).unwrap();
        let r = ScalarField::from_fn(mesh, |t, p| 1.0 + 0.1 * t.sin() * p.cos() + 0.05 * t.cos())
            .unwrap();
        let g = compute_geometry(&r, &WarpProfile::euclidean(), Execution::Serial).unwrap();
        let expected = argmax(g.nodes().iter().map(|n| n.kappa[0] / n.tau)).node;
        let zero_a = argmax(g.nodes().iter().map(|n| p_test(n, 0.0, 0.0))).node;
        assert_eq!(zero_a, expected);
    }

    #[test]
    fn barrier_flag() {
        let rec = record(|t, _| 1.9 + 0.2 * t.cos(), true, &MonitorParams::default());
        assert!(!rec.barrier_ok);
    }

    #[test]
    fn gamma_argument_choice() {
        let a = record(|_, _| 2.0, true, &MonitorParams::default());
        let b = record(
            |_, _| 2.0,
            true,
            &MonitorParams {
                gamma_arg: GammaArg::Radius,
                ..Default::default()
            },
        );
        assert_abs_diff_eq!(a.phi_test_max.value, -(2.0f64.ln()) + 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b.phi_test_max.value, -(2.0f64.ln()) + 0.5, epsilon = 1e-14);
        let c = record(|_, _| 1.0, true, &MonitorParams::default());
        assert_abs_diff_eq!(c.phi_test_max.value, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn stability_flags() {
        let row = |k: f64| StabilityRow {
            resolution: Resolution::reduced(16),
            tau_min: 1.0,
            grad_max: 0.0,
            kappa_max: k,
        };
        assert!(!StabilityTable::from_rows(vec![row(1.0), row(1.001)]).unstable);
        assert!(StabilityTable::from_rows(vec![row(1.0), row(1.1), row(1.3)]).unstable);
        assert!(!StabilityTable::from_rows(vec![row(1.0), row(1.1), row(1.101)]).unstable);
    }
}
