use ecosched_core::model::ValidationError;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invalid instance: {0}")]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    Usage(String),
    #[error("algorithm failed: {0}")]
    Algorithm(String),
}

impl AppError {
    /// 1 for anything the caller got wrong, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Io { .. } => 3,
            _ => 1,
        }
    }
}

impl From<csv::Error> for AppError {
    fn from(e: csv::Error) -> Self {
        match e.kind() {
            csv::ErrorKind::Io(_) => AppError::Io { path: "csv".into(), source: std::io::Error::other(e.to_string()) },
            _ => AppError::Parse(e.to_string()),
        }
    }
}
