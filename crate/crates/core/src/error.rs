use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("region not covered by the grid box")]
    RegionNotCovered,

    #[error("degenerate ball mass")]
    DegenerateMass,

    #[error("empty ball family")]
    EmptyFamily,

    #[error("outside A_p range: {0}")]
    OutsideApRange(String),

    #[error("weight is not integrable: {0}")]
    NotIntegrable(String),

    #[error("matrix field is not symmetric at node {node}")]
    Asymmetric { node: usize },

    #[error("ellipticity fails at node {node}")]
    NotElliptic { node: usize },

    #[error("assembled system is not symmetric (drift {drift:e})")]
    NotSpd { drift: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular point")]
    SingularPoint,

    #[error("zero input")]
    ZeroInput,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
