//! Numerical solver for prescribed Weingarten curvature equations
//!
//! ```text
//!     sigma_k / sigma_l (mu(eta)) = f(V, nu)
//! ```
//!
//! for closed star-shaped hypersurfaces written as radial graphs `r: S^2 -> I`
//! inside a warped product `I x_lambda S^2` with metric `dr^2 + lambda(r)^2 g'`.
//! Here `eta = H g - h` is the first Newton tensor of the second fundamental
//! form and `mu(eta)` its eigenvalues.
//!
//! The crate is organised bottom-up:
//!
//! - [`warp`]: the warping function and its derived scalars,
//! - [`symmetric`]: elementary symmetric functions, the Hessian quotient
//!   operator and its derivatives on the Garding cone,
//! - [`mesh`]: a pole-free latitude/longitude discretisation of the round
//!   sphere with frame derivatives,
//! - [`geometry`]: induced metric, shape operator, principal curvatures and
//!   the support function of a radial graph, plus independent oracles,
//! - [`problem`]: the prescribed function `f`, the homotopy family and the
//!   hypothesis checker,
//! - [`solver`]: damped Newton with cone safeguarding and continuation in `t`,
//! - [`monitor`]: the quantities controlled by the a priori estimates.
//!
//! Node-parallel work runs on rayon when the `parallel` feature is enabled
//! (the default); every entry point also accepts [`Execution::Serial`].

pub mod error;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod monitor;
pub mod par;
pub mod problem;
pub mod selftest;
pub mod solver;
pub mod symmetric;
pub mod warp;

pub use error::{Error, Result};
pub use geometry::{compute_geometry, GraphGeometry, NodeGeometry};
pub use mesh::{ScalarField, SphereMesh};
pub use monitor::{monitor, MonitorParams, MonitorRecord};
pub use par::Execution;
pub use problem::{Forcing, ProblemSpec};
pub use solver::{continuation_solve, newton_solve, residual, SolverOptions};
pub use symmetric::{EigenTuple, QuotientOrder};
pub use warp::WarpProfile;

/// Dimension of the hypersurface. The base is fixed to the round `S^2`.
pub const DIM: usize = 2;
