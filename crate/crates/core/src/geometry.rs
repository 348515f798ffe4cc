//! Geometry of the radial graph `{(r(u), u)}` in a warped product over the
//! round sphere.
//!
//! All tensors are expressed in the orthonormal frame of the base sphere
//! (see [`crate::mesh`]). For a frame jet `r, r_i, r_ij`:
//!
//! * `g_ij = lambda^2 delta_ij + r_i r_j`, `v = sqrt(lambda^2 + |grad r|^2)`
//! * `h_ij = (-lambda r_ij + 2 lambda' r_i r_j + lambda^2 lambda' delta_ij) / v`
//! * `h^i_j = g^ik h_kj`, `tau = lambda^2 / v`, `<nu, d_r> = lambda / v`
//!
//! with the outward normal, so round spheres have positive curvature.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{FrameJet, Parity, ScalarField, SphereMesh};
use crate::par::{try_map_range, Execution};
use crate::warp::{WarpProfile, WarpValues};

pub type Mat2 = [[f64; 2]; 2];

/// Every geometric quantity at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeGeometry {
    pub r: f64,
    /// Frame gradient `(r_1, r_2)`.
    pub grad: [f64; 2],
    /// Frame Hessian `r_ij`.
    pub hess: Mat2,
    pub lambda: f64,
    pub d_lambda: f64,
    pub v: f64,
    pub g: Mat2,
    pub g_inv: Mat2,
    /// Second fundamental form `h_ij`.
    pub h_lower: Mat2,
    /// Shape operator `h^i_j`.
    pub h_mixed: Mat2,
    /// Mean curvature, `trace h^i_j`.
    pub mean: f64,
    /// Principal curvatures, descending.
    pub kappa: [f64; 2],
    /// Eigenvalues of `eta = H g - h`: `mu_i = H - kappa_i`.
    pub mu: [f64; 2],
    pub tau: f64,
    pub nu_r: f64,
    pub capital_lambda: f64,
}

impl NodeGeometry {
    /// Geometry from the frame jet of `r`, `lambda` and its derivative at `r`,
    /// and `Lambda(r)`.
    pub fn from_jet(jet: &FrameJet, w: &WarpValues, capital_lambda: f64) -> Self {
        let lam = w.lambda;
        let dl = w.d_lambda;
        let p = [jet.d1, jet.d2];
        let hess = [[jet.d11, jet.d12], [jet.d12, jet.d22]];
        let lam2 = lam * lam;
        let v2 = lam2 + p[0] * p[0] + p[1] * p[1];
        let v = v2.sqrt();

        let mut g = [[0.0; 2]; 2];
        let mut g_inv = [[0.0; 2]; 2];
        let mut h_lower = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 1.0 } else { 0.0 };
                g[i][j] = lam2 * d + p[i] * p[j];
                g_inv[i][j] = (d - p[i] * p[j] / v2) / lam2;
                h_lower[i][j] = (-lam * hess[i][j] + 2.0 * dl * p[i] * p[j] + lam2 * dl * d) / v;
            }
        }
        let h_mixed = mat_mul(&g_inv, &h_lower);
        let mean = h_mixed[0][0] + h_mixed[1][1];
        let kappa = principal_curvatures(&g, &h_lower);
        Self {
            r: jet.value,
            grad: p,
            hess,
            lambda: lam,
            d_lambda: dl,
            v,
            g,
            g_inv,
            h_lower,
            h_mixed,
            mean,
            kappa,
            mu: [mean - kappa[0], mean - kappa[1]],
            tau: lam2 / v,
            nu_r: lam / v,
            capital_lambda,
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad[0].hypot(self.grad[1])
    }

    /// `|(g h^.)_12 - (g h^.)_21|`: lowering the shape operator again must
    /// give a symmetric tensor.
    pub fn symmetry_residual(&self) -> f64 {
        let low = mat_mul(&self.g, &self.h_mixed);
        (low[0][1] - low[1][0]).abs()
    }
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Eigenvalues of a symmetric 2x2 matrix, descending.
pub fn sym_eigenvalues(a: f64, b: f64, c: f64) -> [f64; 2] {
    let mid = 0.5 * (a + c);
    let rad = (0.5 * (a - c)).hypot(b);
    [mid + rad, mid - rad]
}

/// Eigenvalues of `g^-1 h` via the congruent symmetric matrix
/// `L^-1 h L^-T` with `g = L L^T`.
pub fn principal_curvatures(g: &Mat2, h: &Mat2) -> [f64; 2] {
    let l11 = g[0][0].sqrt();
    let l21 = g[1][0] / l11;
    let l22 = (g[1][1] - l21 * l21).sqrt();
    // M = L^-1 h L^-T, written out for the lower-triangular L
    let m11 = h[0][0] / (l11 * l11);
    let m12 = (h[0][1] - l21 * h[0][0] / l11) / (l11 * l22);
    let m22 =
        (h[1][1] - 2.0 * l21 * h[0][1] / l11 + l21 * l21 * h[0][0] / (l11 * l11)) / (l22 * l22);
    sym_eigenvalues(m11, m12, m22)
}

/// Immutable geometry snapshot of a graph.
#[derive(Debug, Clone)]
pub struct GraphGeometry {
    mesh: Arc<SphereMesh>,
    nodes: Vec<NodeGeometry>,
}

impl GraphGeometry {
    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Per-node quantity as a field on the same mesh.
    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> ScalarField {
        ScalarField::new(Arc::clone(&self.mesh), self.nodes.iter().map(f).collect())
            .expect("geometry values are finite")
    }

    pub fn max_symmetry_residual(&self) -> f64 {
        self.nodes
            .iter()
            .map(NodeGeometry::symmetry_residual)
            .fold(0.0, f64::max)
    }
}

/// Geometry at one node of `values` on `mesh`.
pub fn node_geometry(
    mesh: &SphereMesh,
    values: &[f64],
    node: usize,
    profile: &WarpProfile,
) -> Result<NodeGeometry> {
    let jet = mesh.jet_at(values, node);
    for x in [jet.d1, jet.d2, jet.d11, jet.d12, jet.d22] {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "derivative",
                node,
            });
        }
    }
    let w = profile.eval(jet.value)?;
    let cap = profile.capital_lambda(jet.value)?;
    Ok(NodeGeometry::from_jet(&jet, &w, cap))
}

pub fn compute_geometry(
    r: &ScalarField,
    profile: &WarpProfile,
    exec: Execution,
) -> Result<GraphGeometry> {
    let mesh = r.mesh();
    let nodes = try_map_range(exec, mesh.len(), |i| {
        node_geometry(mesh, r.values(), i, profile)
    })?;
    Ok(GraphGeometry {
        mesh: Arc::clone(mesh),
        nodes,
    })
}

/// Principal curvatures (descending) of the embedding
/// `X = r e(t, p)`, `e = (sin t cos p, sin t sin p, cos t)`, in flat space.
///
/// Partial derivatives of `X` combine finite differences of `r` with the
/// exact derivatives of `e`; the normal is the normalised `X_t x X_p`.
pub fn extrinsic_oracle_euclidean(r: &ScalarField) -> Result<Vec<[f64; 2]>> {
    let mesh = r.mesh();
    (0..mesh.len())
        .map(|i| {
            let (t, p) = mesh.coords(i);
            let (st, ct, sp, cp) = (t.sin(), t.cos(), p.sin(), p.cos());
            let e = [st * cp, st * sp, ct];
            let e_t = [ct * cp, ct * sp, -st];
            let e_p = [-st * sp, st * cp, 0.0];
            let e_tt = [-e[0], -e[1], -e[2]];
            let e_tp = [-ct * sp, ct * cp, 0.0];
            let e_pp = [-st * cp, -st * sp, 0.0];
            let rv = r.values()[i];
            let d = mesh.coord_derivs(r.values(), i);
            let comb = |terms: &[(f64, &[f64; 3])]| -> [f64; 3] {
                let mut out = [0.0; 3];
                for (c, v) in terms {
                    for k in 0..3 {
                        out[k] += c * v[k];
                    }
                }
                out
            };
            let xt = comb(&[(d.t, &e), (rv, &e_t)]);
            let xp = comb(&[(d.p, &e), (rv, &e_p)]);
            let xtt = comb(&[(d.tt, &e), (2.0 * d.t, &e_t), (rv, &e_tt)]);
            let xtp = comb(&[(d.tp, &e), (d.t, &e_p), (d.p, &e_t), (rv, &e_tp)]);
            let xpp = comb(&[(d.pp, &e), (2.0 * d.p, &e_p), (rv, &e_pp)]);

            let n = cross(&xt, &xp);
            let norm = dot(&n, &n).sqrt();
            let scale = dot(&xt, &xt).sqrt() * dot(&xp, &xp).sqrt();
            if !(norm > 1e-12 * scale) {
                return Err(Error::DegenerateEmbedding { node: i });
            }
            let n = [n[0] / norm, n[1] / norm, n[2] / norm];
            let first = [
                [dot(&xt, &xt), dot(&xt, &xp)],
                [dot(&xt, &xp), dot(&xp, &xp)],
            ];
            let (ll, mm, nn) = (-dot(&xtt, &n), -dot(&xtp, &n), -dot(&xpp, &n));
            Ok(principal_curvatures(&first, &[[ll, mm], [mm, nn]]))
        })
        .collect()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Max-norm residuals of the support-function identities on an
/// axisymmetric graph, with `s` the meridian arc length:
///
/// * `lambda_gradient`: `Lambda_s = lambda r_s`
/// * `tau_gradient`: `tau_s = Lambda_s kappa_mer`
/// * `lambda_hessian`: `Lambda_ss = lambda' - tau kappa_mer` and
///   `(rho_s / rho) Lambda_s = lambda' - tau kappa_par`, `rho = lambda sin theta`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuppIdentityReport {
    pub lambda_gradient: f64,
    pub tau_gradient: f64,
    pub lambda_hessian: f64,
}

impl SuppIdentityReport {
    pub fn max(&self) -> f64 {
        self.lambda_gradient
            .max(self.tau_gradient)
            .max(self.lambda_hessian)
    }
}

fn require_reduced_space_form(geom: &GraphGeometry, profile: &WarpProfile) -> Result<()> {
    if !geom.mesh.is_reduced() {
        return Err(Error::Unsupported(
            "identity checks need a reduced (axisymmetric) mesh".into(),
        ));
    }
    if profile.space_form_curvature().is_none() {
        return Err(Error::Unsupported(
            "identity checks need a space-form profile".into(),
        ));
    }
    Ok(())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn check_supp_identities(
    geom: &GraphGeometry,
    profile: &WarpProfile,
) -> Result<SuppIdentityReport> {
    require_reduced_space_form(geom, profile)?;
    let mesh = &geom.mesh;
    let nodes = &geom.nodes;
    let col = |f: &dyn Fn(&NodeGeometry) -> f64| -> Vec<f64> { nodes.iter().map(f).collect() };

    let cap = col(&|n| n.capital_lambda);
    let d_cap = mesh.d_theta_reduced(&cap, Parity::Even)?;
    let cap_s: Vec<f64> = d_cap.iter().zip(nodes).map(|(d, n)| d / n.v).collect();
    let expect_cap_s = col(&|n| n.lambda * n.grad[0] / n.v);

    let d_tau = mesh.d_theta_reduced(&col(&|n| n.tau), Parity::Even)?;
    let tau_s: Vec<f64> = d_tau.iter().zip(nodes).map(|(d, n)| d / n.v).collect();
    let expect_tau_s: Vec<f64> = cap_s
        .iter()
        .zip(nodes)
        .map(|(c, n)| c * n.h_mixed[0][0])
        .collect();

    let d_cap_s = mesh.d_theta_reduced(&cap_s, Parity::Odd)?;
    let cap_ss: Vec<f64> = d_cap_s.iter().zip(nodes).map(|(d, n)| d / n.v).collect();
    let expect_ss = col(&|n| n.d_lambda - n.tau * n.h_mixed[0][0]);

    let (rho_ratio, _) = parallel_radius_ratio(geom)?;
    let par_lhs: Vec<f64> = rho_ratio.iter().zip(&cap_s).map(|(q, c)| q * c).collect();
    let expect_par = col(&|n| n.d_lambda - n.tau * n.h_mixed[1][1]);

    Ok(SuppIdentityReport {
        lambda_gradient: max_abs_diff(&cap_s, &expect_cap_s),
        tau_gradient: max_abs_diff(&tau_s, &expect_tau_s),
        lambda_hessian: max_abs_diff(&cap_ss, &expect_ss).max(max_abs_diff(&par_lhs, &expect_par)),
    })
}

/// `rho_s / rho` and `rho` for the parallel radius `rho = lambda(r) sin theta`.
fn parallel_radius_ratio(geom: &GraphGeometry) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = &geom.mesh;
    let rho: Vec<f64> = geom
        .nodes
        .iter()
        .zip(mesh.thetas())
        .map(|(n, t)| n.lambda * t.sin())
        .collect();
    let d_rho = mesh.d_theta_reduced(&rho, Parity::Odd)?;
    let ratio = d_rho
        .iter()
        .zip(&rho)
        .zip(&geom.nodes)
        .map(|((d, p), n)| d / (n.v * p))
        .collect();
    Ok((ratio, rho))
}

/// Max-norm Codazzi residual on an axisymmetric graph in a space form, in
/// the product form `d_s(rho kappa_par) - rho_s kappa_mer` with
/// `rho = lambda sin theta`. Dividing by `rho` recovers
/// `d_s kappa_par - (rho_s / rho)(kappa_mer - kappa_par)`.
pub fn check_codazzi_flat(geom: &GraphGeometry, profile: &WarpProfile) -> Result<f64> {
    require_reduced_space_form(geom, profile)?;
    let mesh = &geom.mesh;
    let (_, rho) = parallel_radius_ratio(geom)?;
    let d_rho = mesh.d_theta_reduced(&rho, Parity::Odd)?;
    let rho_kpar: Vec<f64> = geom
        .nodes
        .iter()
        .zip(&rho)
        .map(|(n, p)| p * n.h_mixed[1][1])
        .collect();
    let d_rho_kpar = mesh.d_theta_reduced(&rho_kpar, Parity::Odd)?;
    Ok(geom
        .nodes
        .iter()
        .zip(d_rho_kpar.iter().zip(&d_rho))
        .fold(0.0, |m, (n, (lhs, rs))| {
            m.max(((lhs - rs * n.h_mixed[0][0]) / n.v).abs())
        }))
}

/// Residuals of a check at increasing resolutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub rows: Vec<(usize, f64)>,
}

impl RefinementStudy {
    pub fn run(resolutions: &[usize], mut check: impl FnMut(usize) -> Result<f64>) -> Result<Self> {
        let rows = resolutions
            .iter()
            .map(|&n| check(n).map(|res| (n, res)))
            .collect::<Result<_>>()?;
        Ok(Self { rows })
    }

    /// `res(n_i) / res(n_{i+1})` for consecutive rows.
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].1 / w[1].1).collect()
    }

    /// Set when some refinement step fails to reduce the residual, i.e. the
    /// coarse residual is not dominated by truncation error.
    pub fn not_converging(&self) -> bool {
        self.rows.windows(2).any(|w| w[1].1 >= w[0].1)
    }

    pub fn finest(&self) -> Option<f64> {
        self.rows.last().map(|r| r.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SphereMesh;
    use approx::assert_abs_diff_eq;

    fn geom(
        mesh: Arc<SphereMesh>,
        profile: &WarpProfile,
        f: impl Fn(f64, f64) -> f64,
    ) -> GraphGeometry {
        let r = ScalarField::from_fn(mesh, f).unwrap();
        compute_geometry(&r, profile, Execution::Serial).unwrap()
    }

    #[test]
    fn round_sphere_euclidean() {
        let mesh = SphereMesh::build(16, 32, false).unwrap();
        for rho in [0.5, 1.0, 3.0] {
            let g = geom(mesh.clone(), &WarpProfile::euclidean(), |_, _| rho);
            for n in g.nodes() {
                assert_abs_diff_eq!(n.h_mixed[0][0], 1.0 / rho, epsilon = 1e-14);
                assert_abs_diff_eq!(n.h_mixed[0][1], 0.0, epsilon = 1e-14);
                assert_abs_diff_eq!(n.mean, 2.0 / rho, epsilon = 1e-14);
                assert_abs_diff_eq!(n.mu[0], 1.0 / rho, epsilon = 1e-14);
                assert_abs_diff_eq!(n.mu[1], 1.0 / rho, epsilon = 1e-14);
                assert_abs_diff_eq!(n.tau, rho, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn constant_graph_mu_is_zeta() {
        let mesh = SphereMesh::build(16, 0, true).unwrap();
        let profiles = [
            WarpProfile::euclidean(),
            WarpProfile::spherical(),
            WarpProfile::hyperbolic(),
            WarpProfile::custom(vec![0.0, 1.0, 0.5], (0.0, 10.0)).unwrap(),
        ];
        for p in &profiles {
            let c = 0.7;
            let g = geom(mesh.clone(), p, |_, _| c);
            let z = p.zeta(c).unwrap();
            for n in g.nodes() {
                assert_abs_diff_eq!(n.mu[0], z, epsilon = 1e-13);
                assert_abs_diff_eq!(n.mu[1], z, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn algebraic_invariants_on_a_bumpy_graph() {
        let mesh = SphereMesh::build(32, 64, false).unwrap();
        let g = geom(mesh, &WarpProfile::spherical(), |t, p| {
            0.8 + 0.1 * t.sin() * p.cos() + 0.05 * t.cos().powi(2)
        });
        for n in g.nodes() {
            assert!(n.v >= n.lambda && n.lambda > 0.0);
            assert!(n.tau > 0.0 && n.tau <= n.lambda);
            assert_abs_diff_eq!(n.tau * n.v, n.lambda * n.lambda, epsilon = 1e-14);
            assert_abs_diff_eq!(n.kappa[0] + n.kappa[1], n.mean, epsilon = 1e-12);
            assert_abs_diff_eq!(n.mu[0] + n.mu[1], n.mean, epsilon = 1e-12);
            assert!(n.kappa[0] >= n.kappa[1]);
            assert!(n.symmetry_residual() <= 1e-10);
        }
    }

    #[test]
    fn principal_curvatures_match_general_eigensolve() {
        let g = [[2.0, 0.3], [0.3, 1.5]];
        let h = [[0.7, -0.2], [-0.2, 1.1]];
        let k = principal_curvatures(&g, &h);
        let gi = {
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            [
                [g[1][1] / det, -g[0][1] / det],
                [-g[1][0] / det, g[0][0] / det],
            ]
        };
        let a = mat_mul(&gi, &h);
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (tr * tr / 4.0 - det).sqrt();
        assert_abs_diff_eq!(k[0], tr / 2.0 + disc, epsilon = 1e-14);
        assert_abs_diff_eq!(k[1], tr / 2.0 - disc, epsilon = 1e-14);
    }

    #[test]
    fn oracle_on_round_sphere() {
        let mesh = SphereMesh::build(16, 32, false).unwrap();
        let r = ScalarField::constant(mesh, 2.0);
        for k in extrinsic_oracle_euclidean(&r).unwrap() {
            assert_abs_diff_eq!(k[0], 0.5, epsilon = 1e-8);
            assert_abs_diff_eq!(k[1], 0.5, epsilon = 1e-8);
        }
    }

    #[test]
    fn oracle_agrees_on_reduced_mesh() {
        let mesh = SphereMesh::build(64, 0, true).unwrap();
        let r = ScalarField::from_fn(mesh, |t, _| 1.0 + 0.05 * t.cos()).unwrap();
        let g = compute_geometry(&r, &WarpProfile::euclidean(), Execution::Serial).unwrap();
        for (n, k) in g
            .nodes()
            .iter()
            .zip(extrinsic_oracle_euclidean(&r).unwrap())
        {
            assert_abs_diff_eq!(n.kappa[0], k[0], epsilon = 1e-12);
            assert_abs_diff_eq!(n.kappa[1], k[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn identities_on_constant_graph() {
        let mesh = SphereMesh::build(32, 0, true).unwrap();
        for p in [
            WarpProfile::euclidean(),
            WarpProfile::spherical(),
            WarpProfile::hyperbolic(),
        ] {
            let g = geom(mesh.clone(), &p, |_, _| 0.9);
            assert!(check_supp_identities(&g, &p).unwrap().max() <= 1e-10);
            assert!(check_codazzi_flat(&g, &p).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn refinement_study_flags_stagnation() {
        let s = RefinementStudy::run(&[1, 2, 3], |n| Ok([1.0, 0.1, 0.2][n - 1])).unwrap();
        assert!(s.not_converging());
        let s = RefinementStudy::run(&[1, 2], |n| Ok(1.0 / (n as f64).powi(4))).unwrap();
        assert!(!s.not_converging());
        assert_abs_diff_eq!(s.ratios()[0], 16.0, epsilon = 1e-12);
    }
}
