use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("coverage: {0}")]
    Coverage(String),
    #[error("empty mask")]
    EmptyMask,
    #[error("insufficient mask: {got} set pixels, need at least {need}")]
    InsufficientMask { got: usize, need: usize },
    #[error("no motion detected in series")]
    NoMotion,
    #[error("no full opening-closing cycle")]
    NoFullCycle,
    #[error("degenerate amplitude: {0}")]
    DegenerateAmplitude(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("parse error in {file}: {message}")]
    Parse { file: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed or inconsistent user input,
    /// as opposed to internal failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Manifest(_) | Error::Parse { .. }
        )
    }
}
