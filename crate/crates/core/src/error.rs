use thiserror::Error;

/// Errors raised by the solvers, the template loader and the harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("scale indeterminate: {0}")]
    ScaleIndeterminate(String),

    #[error("invalid homography: {0}")]
    InvalidHomography(String),

    #[error("solver {solver} needs {required}, got m={m} 2D-2D and n={n} 2D-3D correspondences")]
    WrongConfiguration {
        solver: String,
        required: String,
        m: usize,
        n: usize,
    },

    #[error("template error: {0}")]
    Template(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for errors that describe a geometrically degenerate instance
    /// rather than malformed input.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::DegenerateInput(_)
                | Error::DegenerateConfiguration(_)
                | Error::ScaleIndeterminate(_)
                | Error::InvalidHomography(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
