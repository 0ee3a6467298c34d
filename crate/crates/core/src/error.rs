use thiserror::Error;

/// Errors raised by model construction, search and file handling.
#[derive(Debug, Error)]
pub enum MpsError {
    #[error("index out of range: {what} = {index} (size {size})")]
    Range {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stage {stage} is at or beyond the horizon {horizon}")]
    HorizonExceeded { stage: usize, horizon: usize },

    #[error("capacity exceeded: {what} needs {needed} but the cap is {cap}; {hint}")]
    Capacity {
        what: &'static str,
        needed: u64,
        cap: u64,
        hint: &'static str,
    },

    #[error("invalid model:\n{0}")]
    Invalid(String),

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MpsError>;

pub(crate) fn check_range(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(MpsError::Range { what, index, size })
    }
}
