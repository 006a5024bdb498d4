use std::fmt;

use icse_core::IcseError;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<IcseError> for CliError {
    fn from(e: IcseError) -> Self {
        let msg = e.to_string();
        match e {
            IcseError::Config(_) | IcseError::LossSpec(_) | IcseError::Capacity(_) => CliError::Config(msg),
            IcseError::Shape(_) | IcseError::Rank(_) | IcseError::Covariance(_) => CliError::Data(msg),
            IcseError::Infeasible(_)
            | IcseError::Numerical(_)
            | IcseError::DegenerateWeights(_)
            | IcseError::Study(_) => CliError::Numerical(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
