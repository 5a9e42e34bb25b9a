use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The CLI maps [`Error::Domain`]-like variants to exit code 2 and
/// resolution failures to exit code 3 (see [`Error::exit_code`]).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Hardware floats would overflow; use tower arithmetic instead.
    #[error("range error: {0}")]
    Range(String),
    /// An orbit fell into the Fatou half-plane Re z < beta.
    #[error("escaped to Fatou half-plane at step {step}")]
    Escaped { step: usize },
    /// A real-dominant orbit point left the representable angle regime.
    #[error("angle regime violated at level {level}: theta = {theta}")]
    AngleRegime { level: u32, theta: f64 },
    /// A numerical procedure failed to reach its target accuracy.
    #[error("numerical resolution failure: {0}")]
    Resolution(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resolution(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
