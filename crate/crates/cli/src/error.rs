use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for bad flags, configs or input files.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for runs that failed numerically or did not converge.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] gradalign::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use gradalign::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(
                E::Indefinite { .. }
                | E::Singular
                | E::NotConverged(_)
                | E::EigenNoConvergence { .. }
                | E::Sequencing(_),
            ) => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}
