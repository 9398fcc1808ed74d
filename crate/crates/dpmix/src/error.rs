use thiserror::Error;

/// Errors produced by the library and the CLI front-end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("data error at row {row}, column {column}: {msg}")]
    Data {
        row: usize,
        column: String,
        msg: String,
    },

    #[error("stick vector too short to certify the component bound (have {have} components)")]
    InsufficientSticks { have: usize },

    #[error("stick extension exceeded the cap of {cap} components at sweep {sweep}")]
    StickExtensionCap { cap: usize, sweep: usize },

    #[error("no allocation candidate for individual {individual} at sweep {sweep}: slice variables and weights are inconsistent")]
    ImpossibleState { individual: usize, sweep: usize },

    #[error("sweep {sweep}, step {step}: {source}")]
    Sweep {
        sweep: usize,
        step: char,
        #[source]
        source: Box<Error>,
    },

    #[error("invariant violated at sweep {sweep}: {what}")]
    InvariantViolation { sweep: usize, what: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {msg}")]
    FileFormat { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_step(self, sweep: usize, step: char) -> Error {
        Error::Sweep {
            sweep,
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
