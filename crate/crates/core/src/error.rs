use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("empty descriptor set: {0}")]
    EmptySet(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("insufficient calibration data for `{technique}`: {got} samples, need at least {needed}")]
    InsufficientData {
        technique: String,
        got: usize,
        needed: usize,
    },

    #[error("incomplete calibration: {0}")]
    IncompleteCalibration(String),

    #[error("undefined evidence: both likelihoods are zero")]
    UndefinedEvidence,

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Stable short code used as the diagnostic prefix by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "E001",
            Error::UnknownTechnique(_) => "E002",
            Error::Format(_) => "E003",
            Error::EmptySet(_) => "E004",
            Error::Data(_) => "E005",
            Error::InsufficientData { .. } => "E006",
            Error::IncompleteCalibration(_) => "E007",
            Error::UndefinedEvidence => "E008",
            Error::InvalidSpec(_) => "E009",
            Error::Config(_) => "E010",
            Error::Io(_) => "E011",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(err: toml::de::Error) -> Self {
        Error::Config(err.to_string())
    }
}
