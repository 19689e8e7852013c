use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Bad input: shapes, ranges, physical admissibility.
    #[error("validation error: {0}")]
    Validation(String),
    /// A computation failed to converge or produced non-finite values.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
