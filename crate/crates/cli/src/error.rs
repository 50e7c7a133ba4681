use motionlab_core::Error as CoreError;
use thiserror::Error;

/// Failures of a command, each with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("condition (B) fails: {0}")]
    ConditionB(String),

    #[error("count audit: {0}")]
    CountAudit(String),

    #[error("budget: {0}")]
    Budget(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error(transparent)]
    Core(CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::CountShortfall { found, expected } => CliError::CountAudit(format!("found {found}/{expected}")),
            CoreError::Budget(msg) => CliError::Budget(msg),
            other => CliError::Core(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConditionB(_) => 2,
            CliError::CountAudit(_) => 3,
            CliError::Budget(_) => 4,
            CliError::MissingArtifact(_) => 5,
            CliError::Config(_) | CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(CliError::from(CoreError::CountShortfall { found: 4, expected: 5 }).exit_code(), 3);
        assert_eq!(CliError::from(CoreError::Budget("n".into())).exit_code(), 4);
        assert_eq!(CliError::from(CoreError::InvalidArgument("x".into())).exit_code(), 1);
        assert_eq!(CliError::ConditionB("m".into()).exit_code(), 2);
        assert_eq!(CliError::MissingArtifact("f".into()).exit_code(), 5);
    }
}
