use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// The CSV header lacks a column the schema maps to.
    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Circular mean requested for directions whose resultant vanishes.
    #[error("degenerate direction: course resultant has zero length")]
    DegenerateDirection,

    #[error("model incomplete: {0}")]
    ModelIncomplete(&'static str),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("version mismatch: {found} (expected {expected})")]
    VersionMismatch { expected: String, found: String },
}

impl Error {
    /// Stable snake_case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Schema { .. } => "schema",
            Error::EmptyDataset => "empty_dataset",
            Error::EmptyTrajectory => "empty_trajectory",
            Error::InvalidPoint(_) => "invalid_point",
            Error::InvalidParams(_) => "invalid_params",
            Error::DegenerateDirection => "degenerate_direction",
            Error::ModelIncomplete(_) => "model_incomplete",
            Error::Calibration(_) => "calibration",
            Error::Config(_) => "config",
            Error::VersionMismatch { .. } => "version_mismatch",
        }
    }
}
