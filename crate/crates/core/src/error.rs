use thiserror::Error;

/// Error taxonomy for the whole crate. The CLI maps these onto exit codes:
/// `Config` -> 2 (usage), `Data`/`Io` -> 3, `Dim`/`Contract`/`Numeric` -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Dim(_) | Error::Contract(_) | Error::Numeric(_) => 4,
        }
    }
}
