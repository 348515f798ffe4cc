//! Latitude/longitude discretisation of the round sphere.
//!
//! Colatitudes are staggered, `theta_j = (j + 1/2) pi / n_theta`, so no node
//! sits on a pole. Stencils that run past a pole continue on the antipodal
//! meridian: a smooth function on the sphere satisfies
//! `F(-theta, phi) = F(theta, phi + pi)`, and that extension is smooth in
//! `(theta, phi)`, so centred differences keep their order across the pole.
//!
//! Derivatives are returned in the orthonormal frame `e_1 = d_theta`,
//! `e_2 = (1/sin theta) d_phi` of the round metric.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_range, Execution};

/// Fourth-order centred weights for offsets -2..=2.
const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

/// Behaviour of a reduced-mode quantity under continuation through a pole.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub n_theta: usize,
    pub n_phi: usize,
    pub reduced: bool,
}

impl Resolution {
    pub fn full(n_theta: usize, n_phi: usize) -> Self {
        Self {
            n_theta,
            n_phi,
            reduced: false,
        }
    }

    pub fn reduced(n_theta: usize) -> Self {
        Self {
            n_theta,
            n_phi: 1,
            reduced: true,
        }
    }

    pub fn build(self) -> Result<Arc<SphereMesh>> {
        SphereMesh::build(self.n_theta, self.n_phi, self.reduced)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereMesh {
    n_theta: usize,
    /// 1 in reduced mode.
    n_phi: usize,
    reduced: bool,
    d_theta: f64,
    d_phi: f64,
    theta: Vec<f64>,
    sin_theta: Vec<f64>,
    cos_theta: Vec<f64>,
    phi: Vec<f64>,
    /// Per-node quadrature weights; in reduced mode they include the full
    /// azimuthal integral.
    weights: Vec<f64>,
}

/// Value and frame derivatives of a scalar at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameJet {
    pub value: f64,
    /// `r_1 = d_theta r`
    pub d1: f64,
    /// `r_2 = (1/sin theta) d_phi r`
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl FrameJet {
    pub fn grad_norm_sq(&self) -> f64 {
        self.d1 * self.d1 + self.d2 * self.d2
    }
}

/// Raw coordinate derivatives at one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoordDerivs {
    pub t: f64,
    pub p: f64,
    pub tt: f64,
    pub tp: f64,
    pub pp: f64,
}

/// Frame jet from coordinate derivatives, using the Levi-Civita connection
/// of the round metric.
pub fn frame_jet(value: f64, d: &CoordDerivs, sin_t: f64, cos_t: f64) -> FrameJet {
    let cot = cos_t / sin_t;
    FrameJet {
        value,
        d1: d.t,
        d2: d.p / sin_t,
        d11: d.tt,
        d12: d.tp / sin_t - cos_t / (sin_t * sin_t) * d.p,
        d22: d.pp / (sin_t * sin_t) + cot * d.t,
    }
}

impl SphereMesh {
    /// `n_phi` is ignored when `reduced` is set.
    pub fn build(n_theta: usize, n_phi: usize, reduced: bool) -> Result<Arc<Self>> {
        if n_theta < 16 {
            return Err(Error::Resolution(format!(
                "n_theta = {n_theta}, need at least 16"
            )));
        }
        let n_phi = if reduced { 1 } else { n_phi };
        if !reduced && (n_phi < 4 || n_phi % 2 != 0) {
            return Err(Error::Resolution(format!(
                "n_phi = {n_phi}, need an even number >= 4"
            )));
        }
        let d_theta = PI / n_theta as f64;
        let d_phi = 2.0 * PI / n_phi as f64;
        let theta: Vec<f64> = (0..n_theta).map(|j| (j as f64 + 0.5) * d_theta).collect();
        let sin_theta = theta.iter().map(|t| t.sin()).collect();
        let cos_theta = theta.iter().map(|t| t.cos()).collect();
        let phi = (0..n_phi).map(|m| m as f64 * d_phi).collect();
        let fejer = fejer_weights(n_theta);
        let weights = fejer
            .iter()
            .flat_map(|w| std::iter::repeat_n(w * d_phi, n_phi))
            .collect();
        Ok(Arc::new(Self {
            n_theta,
            n_phi,
            reduced,
            d_theta,
            d_phi,
            theta,
            sin_theta,
            cos_theta,
            phi,
            weights,
        }))
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    pub fn resolution(&self) -> Resolution {
        Resolution {
            n_theta: self.n_theta,
            n_phi: self.n_phi,
            reduced: self.reduced,
        }
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn node(&self, j: usize, m: usize) -> usize {
        j * self.n_phi + m
    }

    /// `(j, m)` of a node.
    pub fn indices(&self, node: usize) -> (usize, usize) {
        (node / self.n_phi, node % self.n_phi)
    }

    /// Colatitude and azimuth of a node.
    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (j, m) = self.indices(node);
        (self.theta[j], self.phi[m])
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta
    }

    pub fn sin_cos_theta(&self, j: usize) -> (f64, f64) {
        (self.sin_theta[j], self.cos_theta[j])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Node holding the value at extended indices `(j, m)`, for `j` at most
    /// two rows past either pole.
    pub fn wrap(&self, j: isize, m: isize) -> usize {
        let nt = self.n_theta as isize;
        let np = self.n_phi as isize;
        let half = np / 2;
        let (j, m) = if j < 0 {
            (-j - 1, m + half)
        } else if j >= nt {
            (2 * nt - j - 1, m + half)
        } else {
            (j, m)
        };
        (j * np + m.rem_euclid(np)) as usize
    }

    /// Nearest node to `(theta, phi)`.
    pub fn nearest_node(&self, theta: f64, phi: f64) -> usize {
        let j = ((theta / self.d_theta - 0.5).round().max(0.0) as usize).min(self.n_theta - 1);
        let m = if self.reduced {
            0
        } else {
            ((phi / self.d_phi).round() as isize).rem_euclid(self.n_phi as isize) as usize
        };
        self.node(j, m)
    }

    /// Nodes whose stencils read `node` (the 5x5 neighbourhood, pole-wrapped).
    pub fn stencil_support(&self, node: usize) -> Vec<usize> {
        let (j, m) = self.indices(node);
        let mut out = Vec::with_capacity(25);
        let phi_range = if self.reduced { 0..=0 } else { -2..=2 };
        for a in -2..=2 {
            for b in phi_range.clone() {
                out.push(self.wrap(j as isize + a, m as isize + b));
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn coord_derivs(&self, values: &[f64], node: usize) -> CoordDerivs {
        let (j, m) = self.indices(node);
        let (j, m) = (j as isize, m as isize);
        let at = |a: isize, b: isize| values[self.wrap(j + a, m + b)];

        let t = ((at(-2, 0) - at(2, 0)) + 8.0 * (at(1, 0) - at(-1, 0))) / (12.0 * self.d_theta);
        let tt = (-(at(-2, 0) + at(2, 0)) + 16.0 * (at(-1, 0) + at(1, 0)) - 30.0 * at(0, 0))
            / (12.0 * self.d_theta * self.d_theta);
        if self.reduced {
            return CoordDerivs {
                t,
                tt,
                ..Default::default()
            };
        }
        let p = ((at(0, -2) - at(0, 2)) + 8.0 * (at(0, 1) - at(0, -1))) / (12.0 * self.d_phi);
        let pp = (-(at(0, -2) + at(0, 2)) + 16.0 * (at(0, -1) + at(0, 1)) - 30.0 * at(0, 0))
            / (12.0 * self.d_phi * self.d_phi);
        let mut tp = 0.0;
        for (ia, wa) in D1.iter().enumerate() {
            if *wa == 0.0 {
                continue;
            }
            let a = ia as isize - 2;
            let row = ((at(a, -2) - at(a, 2)) + 8.0 * (at(a, 1) - at(a, -1))) / 12.0;
            tp += wa * row;
        }
        tp /= self.d_theta * self.d_phi;
        CoordDerivs { t, p, tt, tp, pp }
    }

    pub fn jet_at(&self, values: &[f64], node: usize) -> FrameJet {
        let (j, _) = self.indices(node);
        let d = self.coord_derivs(values, node);
        frame_jet(values[node], &d, self.sin_theta[j], self.cos_theta[j])
    }

    /// Reduced-mode `d/d theta` of nodal values with the given pole parity.
    pub fn d_theta_reduced(&self, values: &[f64], parity: Parity) -> Result<Vec<f64>> {
        if !self.reduced || values.len() != self.n_theta {
            return Err(Error::MeshMismatch(
                "reduced-mode derivative on a full mesh".into(),
            ));
        }
        let nt = self.n_theta as isize;
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        let at = |j: isize| -> f64 {
            if j < 0 {
                sign * values[(-j - 1) as usize]
            } else if j >= nt {
                sign * values[(2 * nt - j - 1) as usize]
            } else {
                values[j as usize]
            }
        };
        Ok((0..nt)
            .map(|j| {
                ((at(j - 2) - at(j + 2)) + 8.0 * (at(j + 1) - at(j - 1))) / (12.0 * self.d_theta)
            })
            .collect())
    }
}

/// Fejer's first rule on the staggered nodes: weights for `int_0^pi g sin theta dtheta`.
fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let theta = (j as f64 + 0.5) * PI / n as f64;
            let s: f64 = (1..=n / 2)
                .map(|k| (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0))
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

/// Nodal values on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh: Arc<SphereMesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<SphereMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch(format!(
                "{} values for a mesh with {} nodes",
                values.len(),
                mesh.len()
            )));
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field value",
                node,
            });
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<SphereMesh>, c: f64) -> Self {
        let n = mesh.len();
        Self {
            mesh,
            values: vec![c; n],
        }
    }

    /// Samples `f(theta, phi)` at every node.
    pub fn from_fn(mesh: Arc<SphereMesh>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..mesh.len())
            .map(|i| {
                let (t, p) = mesh.coords(i);
                f(t, p)
            })
            .collect();
        Self::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<SphereMesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn sibling(&self, values: Vec<f64>) -> ScalarField {
        ScalarField {
            mesh: Arc::clone(&self.mesh),
            values,
        }
    }

    pub fn jets(&self, exec: Execution) -> Vec<FrameJet> {
        map_range(exec, self.mesh.len(), |i| self.mesh.jet_at(&self.values, i))
    }

    /// `(r_1, r_2)` in the orthonormal frame.
    pub fn grad_frame(&self) -> (ScalarField, ScalarField) {
        let jets = self.jets(Execution::default());
        (
            self.sibling(jets.iter().map(|j| j.d1).collect()),
            self.sibling(jets.iter().map(|j| j.d2).collect()),
        )
    }

    /// `(r_11, r_12, r_22)`, covariant Hessian in the orthonormal frame.
    pub fn hess_frame(&self) -> (ScalarField, ScalarField, ScalarField) {
        let jets = self.jets(Execution::default());
        (
            self.sibling(jets.iter().map(|j| j.d11).collect()),
            self.sibling(jets.iter().map(|j| j.d12).collect()),
            self.sibling(jets.iter().map(|j| j.d22).collect()),
        )
    }

    /// `r_21 = e_2(r_1) - (nabla_{e_2} e_1) r`, differentiating the nodal
    /// gradient in azimuth. Agrees with `r_12` up to truncation error.
    pub fn hess_mixed_alternate(&self) -> ScalarField {
        let mesh = &self.mesh;
        if mesh.is_reduced() {
            return self.sibling(vec![0.0; mesh.len()]);
        }
        let (r1, _) = self.grad_frame();
        let values = (0..mesh.len())
            .map(|i| {
                let (j, _) = mesh.indices(i);
                let (s, c) = mesh.sin_cos_theta(j);
                let dp_r1 = mesh.coord_derivs(r1.values(), i).p;
                let dp_r = mesh.coord_derivs(&self.values, i).p;
                dp_r1 / s - c / (s * s) * dp_r
            })
            .collect();
        self.sibling(values)
    }

    pub fn integrate(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mesh.weights())
            .map(|(v, w)| v * w)
            .sum()
    }
}
