use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a closed-form function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Ticks or log entries arrived out of order.
    #[error("sequencing error: got tick {got} after {last}")]
    Sequencing { last: u64, got: u64 },

    /// A data asset is malformed, incomplete, or failed validation.
    #[error("data error: {0}")]
    Data(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing asset: {}", .0.display())]
    MissingAsset(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Sequencing { .. } => "sequencing",
            Error::Data(_) => "data",
            Error::Training(_) => "training",
            Error::InvalidConfig(_) => "invalid_config",
            Error::MissingAsset(_) => "missing_asset",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
