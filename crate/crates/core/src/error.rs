use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("degenerate state: superposition has zero norm")]
    DegenerateState,

    #[error("post-selection keeps no outcome with nonzero weight")]
    EmptyPostselection,

    #[error("temperature {value} °C outside calibrated range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("correlation undefined: no coincidences")]
    UndefinedCorrelation,

    #[error("TTAG format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("stream error: {0}")]
    Stream(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfRange { .. } | Error::Domain(_) => 2,
            Error::Format { .. } | Error::Stream(_) => 3,
            Error::InsufficientData(_) | Error::UndefinedCorrelation => 4,
            Error::Model(_) | Error::DegenerateState | Error::EmptyPostselection => 5,
            Error::Io(_) => 1,
        }
    }
}
