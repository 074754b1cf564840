use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error(
        "stencil vector {vector:?} does not fit a lattice with {nodes} nodes per axis (|component| must be <= {limit})"
    )]
    StencilTooLarge {
        vector: Vec<i32>,
        nodes: usize,
        limit: usize,
    },

    #[error("invalid stencil: {0}")]
    InvalidStencil(String),

    #[error("vector {0:?} is not a member of the stencil set")]
    UnknownVector(Vec<i32>),

    #[error("grid functions live on different lattices")]
    LatticeMismatch,

    #[error("derivative of order {requested} requested but only {available} available")]
    DerivativeOrder { requested: u32, available: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time step {dt:e} exceeds the monotone Euler bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite value at step {step} (t = {time})")]
    NonFinite { step: usize, time: f64 },

    #[error("time march is not contracting: residual grew for {steps} consecutive steps (last residual {residual:e})")]
    NonContraction { steps: usize, residual: f64 },

    #[error("dense system is singular at pivot {0}")]
    Singular(usize),

    #[error("coefficients or data depend on time; {0}")]
    TimeDependent(String),

    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
