use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("inconsistent result: {0}")]
    Inconsistency(String),

    #[error("spectral assumption violated: {0}")]
    SpectralAssumption(String),

    #[error("field is not band limited: {0}")]
    BandLimit(String),

    #[error("outside the small-data regime: {0}")]
    OutOfRegime(String),

    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    #[error("modulation decomposition failed: {0}")]
    Decomposition(String),

    #[error("resolvent parameter too close to the eigenvalue pole: {0}")]
    NearPole(String),

    #[error("blow-up detected at t = {last_good_time}: {message}")]
    BlowUp { last_good_time: f64, message: String },

    #[error("radiation reached the boundary at t = {time}: boundary mass fraction {fraction:.3e}")]
    BoundaryPollution { time: f64, fraction: f64 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("experiment stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
