use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("degenerate direction: target coincides with vertex")]
    DegenerateDirection,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("destination cone contains no neighbor")]
    EmptyCone,
    #[error("bound condition violated: {0}")]
    Condition(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
