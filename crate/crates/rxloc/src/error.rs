//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {why}")]
    InvalidInput { what: String, why: String },

    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("scenario {index} out of bounds: distance {distance_km} km not inside section {section} (length {section_km} km)")]
    ScenarioOutOfBounds {
        index: usize,
        section: usize,
        distance_km: f64,
        section_km: f64,
    },

    #[error("undefined impedance: ground-loop current is zero")]
    UndefinedImpedance,

    #[error("PGM format error: {0}")]
    PgmFormat(String),

    #[error("offset ({drow}, {dcol}) does not fit inside a {width}x{height} image")]
    InsufficientPixels {
        drow: i32,
        dcol: i32,
        width: usize,
        height: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch} (mse = {mse})")]
    NonFiniteLoss { epoch: usize, mse: f64 },

    #[error("Levenberg-Marquardt system singular at mu = {mu}")]
    SingularLmSystem { mu: f64 },

    #[error("kernel matrix not positive definite even at maximum jitter {max_jitter}")]
    Conditioning { max_jitter: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model '{model}' failed: {source}")]
    Model {
        model: String,
        #[source]
        source: Box<Error>,
    },

    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { path: String, stage: String },

    #[error("malformed artifact {path}: {why}")]
    MalformedArtifact { path: String, why: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code for the CLI: 1 for config/validation problems, 2 for
    /// runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput { .. } => 1,
            _ => 2,
        }
    }
}
