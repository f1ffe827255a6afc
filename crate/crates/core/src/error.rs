use thiserror::Error;

/// Errors raised by the solver and the study driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("gradient of the exponent field is singular at x = ({x:.3e}, {y:.3e})")]
    SingularPoint { x: f64, y: f64 },

    #[error("evaluation outside the domain of the manufactured field: {0}")]
    Domain(String),

    #[error("linear solver failure: {0}")]
    Linear(String),

    #[error(
        "Newton failed at step {step} (t = {time:.6}) after {iterations} iterations, \
         residual {residual:.3e}"
    )]
    NewtonDiverged {
        step: usize,
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::SingularPoint { .. }
            | Error::Domain(_)
            | Error::Linear(_)
            | Error::NewtonDiverged { .. } => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
