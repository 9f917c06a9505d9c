use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    SolverNonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error(
        "right-hand side incompatible with the null space (weighted residual {residual:.3e}, tolerance {tol:.3e})"
    )]
    IncompatibleRhs { residual: f64, tol: f64 },

    #[error(
        "charge compatibility condition violated: residual {residual:.6e} exceeds tolerance {tol:.1e}; \
         fix the initial concentrations or boundary charge, or pass --allow-incompatible to skip potential solves"
    )]
    CompatibilityViolation { residual: f64, tol: f64 },

    #[error("implicit step rejected: Gummel loop stalled at dt = {dt:.3e} after {retries} halvings")]
    StepRejected { dt: f64, retries: usize },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("expression parse error at position {position}: {message}")]
    ExprParse { position: usize, message: String },

    #[error("time grids do not match: {0}")]
    TimeGridMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
