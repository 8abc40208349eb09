use cim_core::CimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CimError),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 config or validation, 3 numerical divergence, 4 oracle budget.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CimError::Divergence(_) | CimError::Degenerate(_)) => 3,
            CliError::Core(CimError::Budget { .. }) => 4,
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Output(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(CliError::Core(CimError::Budget { n: 30, max: 24 }).exit_code(), 4);
        assert_eq!(CliError::Core(CimError::Divergence("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(CimError::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    }
}
