use std::path::PathBuf;

/// Error type shared by every pipeline stage.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },

    #[error("truncated input: {0}")]
    Truncated(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input too small: {0}")]
    TooSmall(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("provider failure: {0}")]
    Provider(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::Numerical(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
