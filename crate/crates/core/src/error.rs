use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("radius {r} outside the warp domain ({lo}, {hi})")]
    Domain { r: f64, lo: f64, hi: f64 },

    #[error("warp profile violates {what} at r = {r}")]
    Profile { r: f64, what: &'static str },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("{mu:?} lies outside the Garding cone Gamma_{k}")]
    OutsideCone { mu: Vec<f64>, k: usize },

    #[error("graph is not (eta,k)-convex at node {node}: mu = {mu:?}")]
    NotAdmissible { node: usize, mu: [f64; 2] },

    #[error("invalid quotient order k = {k}, l = {l} for n = {n}")]
    QuotientOrder { k: usize, l: usize, n: usize },

    #[error("invalid mesh resolution: {0}")]
    Resolution(String),

    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("degenerate embedding at node {node}")]
    DegenerateEmbedding { node: usize },

    #[error("finite-difference stencil cannot stay inside the cone: {0}")]
    StencilLeavesCone(String),

    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("prescribed function must be positive and finite, got {value} at r = {r}, th = {th}, ph = {ph}")]
    BadForcing {
        value: f64,
        r: f64,
        th: f64,
        ph: f64,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("line search failed after {halvings} halvings (residual {residual:e})")]
    LineSearch { halvings: usize, residual: f64 },

    #[error("iterate left the barrier guard ({lo}, {hi}) at node {node}: r = {r}")]
    BarrierGuard {
        node: usize,
        r: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
