use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] bifree::Error),
}

impl CliError {
    /// 2 for bad input, 3 for numerical failure, 4 for an unmet precondition.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(bifree::Error::Precondition(_)) => 4,
            CliError::Core(e) if e.is_numeric() => 3,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(bifree::Error::Precondition("x".into())).exit_code(), 4);
        assert_eq!(CliError::Core(bifree::Error::Quadrature("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(bifree::Error::InvalidArgument("x".into())).exit_code(), 2);
    }
}
