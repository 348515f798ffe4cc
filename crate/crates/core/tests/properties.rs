use proptest::prelude::*;

use weingarten::geometry::compute_geometry;
use weingarten::problem::{parse_f, Forcing};
use weingarten::solver::{continuation_solve, residual};
use weingarten::symmetric::{quotient, round_threshold, QuotientOrder};
use weingarten::{Execution, ProblemSpec, ScalarField, SolverOptions, SphereMesh, WarpProfile};

fn q20() -> QuotientOrder {
    QuotientOrder::new(2, 0).unwrap()
}

fn builtin() -> impl Strategy<Value = (WarpProfile, f64)> {
    prop_oneof![
        (0.05f64..5.0).prop_map(|r| (WarpProfile::euclidean(), r)),
        (0.05f64..1.5).prop_map(|r| (WarpProfile::spherical(), r)),
        (0.05f64..4.0).prop_map(|r| (WarpProfile::hyperbolic(), r)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zeta_times_lambda_is_lambda_prime((p, r) in builtin()) {
        let w = p.eval(r).unwrap();
        let z = p.zeta(r).unwrap();
        prop_assert!((z * w.lambda - w.d_lambda).abs() <= 4.0 * f64::EPSILON * w.d_lambda);
    }

    #[test]
    fn capital_lambda_derivative_is_lambda((p, r) in builtin()) {
        let h = 1e-5 * r;
        let fd = (p.capital_lambda(r + h).unwrap() - p.capital_lambda(r - h).unwrap()) / (2.0 * h);
        let lam = p.eval(r).unwrap().lambda;
        prop_assert!((fd - lam).abs() <= 1e-8 * lam, "{fd} vs {lam}");
    }

    #[test]
    fn constant_graph_matches_threshold((p, c) in builtin()) {
        let mesh = SphereMesh::build(16, 8, false).unwrap();
        let g = compute_geometry(&ScalarField::constant(mesh, c), &p, Execution::Serial).unwrap();
        let expected = round_threshold(2, q20(), p.zeta(c).unwrap());
        for n in g.nodes() {
            prop_assert!((quotient(&n.mu, q20()).unwrap() - expected).abs() <= 1e-10 * expected.max(1.0));
            prop_assert!(n.kappa.iter().all(|&k| k > 0.0));
        }
    }

    #[test]
    fn algebraic_geometry_identities(a in -0.1f64..0.1, b in -0.1f64..0.1, c in 0.5f64..2.0) {
        let mesh = SphereMesh::build(16, 16, false).unwrap();
        let r = ScalarField::from_fn(mesh, |t, p| c * (1.0 + a * t.sin() * p.cos() + b * t.cos())).unwrap();
        let g = compute_geometry(&r, &WarpProfile::euclidean(), Execution::Serial).unwrap();
        for n in g.nodes() {
            prop_assert!((n.tau * n.v - n.lambda * n.lambda).abs() <= 1e-12 * n.lambda * n.lambda);
            let trace = n.h_mixed[0][0] + n.h_mixed[1][1];
            prop_assert!((trace - n.mean).abs() <= 1e-12 * n.mean.abs().max(1.0));
            prop_assert!((n.mu[0] + n.mu[1] - n.mean).abs() <= 1e-12 * n.mean.abs().max(1.0));
        }
    }

    #[test]
    fn phi_invariants(rm in 0.6f64..1.9, c in 0.1f64..5.0, r in 0.01f64..3.0) {
        let f = Forcing::Expr(parse_f("1/r^2 * exp(1.25 - r)").unwrap());
        let spec = ProblemSpec::with_barrier(q20(), WarpProfile::euclidean(), f, 0.5, 2.0, rm, c).unwrap();
        let phi = spec.barrier_phi(r);
        prop_assert!(phi > 0.0);
        prop_assert_eq!(phi >= 1.0, r <= rm);
        prop_assert!(spec.barrier_phi(r + 1e-3) < phi);
    }

    #[test]
    fn blend_is_affine(t in 0.0f64..=1.0, r in 0.3f64..3.0) {
        let f = Forcing::Expr(parse_f("1/r^2 * exp(1.25 - r) * (1 + 0.1*cos(th))").unwrap());
        let spec = ProblemSpec::new(q20(), WarpProfile::euclidean(), f, 0.5, 2.0).unwrap();
        let (th, ph) = (0.7, 1.1);
        let lhs = spec.blend_f_t(t, r, th, ph, 1.0).unwrap();
        let rhs = (1.0 - t) * spec.f_start(r).unwrap() + t * spec.eval_f(r, th, ph, 1.0).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    }

    #[test]
    fn manufactured_scaled_forcing_is_radially_constant(r in 0.3f64..3.0, th in 0.01f64..3.1) {
        let p = WarpProfile::euclidean();
        let mesh = SphereMesh::build(16, 0, true).unwrap();
        let f = Forcing::manufacture_expr(parse_f("1 + 0.05*cos(th)").unwrap(), &p, q20(), 0.0, &mesh).unwrap();
        let spec = ProblemSpec::new(q20(), p, f, 0.5, 2.0).unwrap();
        let at = |r: f64| r * r * spec.eval_f(r, th, 0.0, 1.0).unwrap();
        prop_assert!((at(r) - at(1.0)).abs() <= 1e-13 * at(1.0));
    }
}

#[test]
fn reported_residual_reproduces_from_scratch() {
    let f = Forcing::Expr(parse_f("1/r^2 * exp(1.25 - r) * (1 + 0.05*cos(th))").unwrap());
    let spec = ProblemSpec::new(q20(), WarpProfile::euclidean(), f, 0.5, 2.0).unwrap();
    let mesh = SphereMesh::build(32, 0, true).unwrap();
    let run = continuation_solve(&spec, &mesh, &SolverOptions::default()).unwrap();
    assert!(run.converged());
    let last = run.last();
    let fresh = residual(&spec, last.t, &last.r).unwrap();
    let norm = fresh.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(
        (norm - last.residual_norm).abs() <= 1e-12,
        "{norm:e} vs {:e}",
        last.residual_norm
    );
    assert!(last.residual_norm <= SolverOptions::default().newton_tol);
}
