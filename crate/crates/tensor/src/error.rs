use thiserror::Error;

#[derive(Debug, Error)]
pub enum TtError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid core layout: {0}")]
    Layout(String),
    #[error("degenerate pivot in maxvol (column {column}, pivot magnitude {magnitude:e})")]
    DegeneratePivot { column: usize, magnitude: f64 },
    #[error("oracle failed at multi-index {index:?}: {message}")]
    Oracle { index: Vec<usize>, message: String },
    #[error("singular local system at core {core}")]
    SingularLocal { core: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("container format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TtError>;
