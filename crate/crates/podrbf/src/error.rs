use std::path::PathBuf;

use podrbf_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot access {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed {}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Numerical(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// 1 for configuration and input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(CoreError::InvalidConfig(_) | CoreError::InvalidProblem(_)) => 1,
            Self::Numerical(_) => 2,
            _ => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::format("a.csv", "bad").exit_code(), 1);
        assert_eq!(CliError::from(CoreError::SingularGram).exit_code(), 2);
        assert_eq!(CliError::from(CoreError::InvalidConfig("x".into())).exit_code(), 1);
    }
}
