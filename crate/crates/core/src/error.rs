use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),

    #[error("cone rows require a continuous problem; found integer variable `{0}`")]
    IntegerCone(String),

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("scenario data: {0}")]
    Scenario(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The realized demand is not (numerically) inside the scenario hull.
    #[error("hull residual {phi:.6e} exceeds tolerance {tol:.6e}")]
    PhiPositive { phi: f64, tol: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
