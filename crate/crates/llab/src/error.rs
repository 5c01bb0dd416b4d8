use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlabError {
    #[error("config error: {0}")]
    Config(String),

    #[error("dimension cap exceeded: model dimension {dim} > cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("selftest failure: {0}")]
    Selftest(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl LlabError {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            LlabError::Config(_) => 2,
            LlabError::DimensionCap { .. } => 3,
            LlabError::Numerical(_) | LlabError::Io(_) => 4,
            LlabError::Selftest(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, LlabError>;
