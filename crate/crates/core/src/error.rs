use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while parsing IDX or CIFAR-10 binary files.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("bad magic number {found:#010x} at offset {offset} of the {file} file (expected {expected:#010x})")]
    BadMagic {
        file: &'static str,
        offset: usize,
        expected: u32,
        found: u32,
    },
    #[error("truncated payload: needed {needed} bytes, found {found}")]
    Truncated { needed: usize, found: usize },
    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("file size {size} is not a multiple of the {record}-byte record size")]
    SizeNotMultiple { size: usize, record: usize },
    #[error("label {label} at record {record} is outside [0, 10)")]
    LabelOutOfRange { record: usize, label: u8 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing data file {path}\n{instructions}")]
    MissingData { path: PathBuf, instructions: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("incomplete table, missing cells: {0}")]
    IncompleteTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Shape(_) => 1,
            Error::Parse(_)
            | Error::MissingData { .. }
            | Error::Data(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::IncompleteTable(_) => 2,
            Error::Domain(_) | Error::Numerical(_) | Error::MissingGradient(_) => 3,
        }
    }
}
