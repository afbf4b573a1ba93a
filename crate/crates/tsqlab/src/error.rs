use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad command line or configuration; nothing was computed.
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] tsqlab_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Exit code: 1 for usage and configuration, 2 when a computation failed.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Core(_) => 2,
        }
    }
}
