use robust_frontier::DroError;

/// Failure of a command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

impl CliError {
    /// 2 config, 3 data, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<DroError> for CliError {
    fn from(e: DroError) -> Self {
        match e {
            DroError::InvalidArgument(_) | DroError::InvalidDivergence { .. } | DroError::Infeasible(_) => {
                CliError::Config(e.to_string())
            }
            DroError::Io(_) | DroError::Format(_) => CliError::Data(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
