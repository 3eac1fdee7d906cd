use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at {file}:{line}: {msg}")]
    Parse { msg: String, file: String, line: usize },
    #[error("grounding error: {0}")]
    Ground(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Unsupported(String),
}

impl Error {
    pub fn parse_at(msg: impl Into<String>, file: impl Into<String>, line: usize) -> Error {
        Error::Parse { msg: msg.into(), file: file.into(), line }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
