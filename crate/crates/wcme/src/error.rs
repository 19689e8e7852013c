use weakcoupling::Error;

/// Exit status: 2 validation, 3 numerical, 4 a property check failed.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error [{module}]: {message}")]
    Validation { module: &'static str, message: String },
    #[error("numerical error [{module}]: {message}")]
    Numerical { module: &'static str, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(module: &'static str, message: String) -> Self {
        CliError::Validation { module, message }
    }

    pub fn numerical(module: &'static str, message: String) -> Self {
        CliError::Numerical { module, message }
    }

    pub fn lib(module: &'static str, e: Error) -> Self {
        match e {
            Error::Validation(message) => CliError::Validation { module, message },
            Error::Numerical(message) => CliError::Numerical { module, message },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 3,
        }
    }
}

pub trait Context<T> {
    fn module(self, module: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for weakcoupling::Result<T> {
    fn module(self, module: &'static str) -> Result<T, CliError> {
        self.map_err(|e| CliError::lib(module, e))
    }
}
