use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    Invalid(String),
    /// Evaluation point lies inside or on the closed probe ball.
    InsideBall,
    /// Evaluation point is too close to the ball surface for a stable derivative.
    StepUnderflow,
    /// Mesh construction, validation or parsing failure.
    Mesh(String),
    /// Zero or non-finite pivot during factorization.
    Singular { index: usize, tau: f64 },
    /// Distance extraction or classification failure.
    Extraction(String),
    /// Refinement did not reach the requested agreement.
    NotConverged { achieved: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Invalid(s) => write!(f, "invalid input: {s}"),
            Error::InsideBall => write!(f, "point lies inside or on the closed probe ball"),
            Error::StepUnderflow => write!(f, "point within 1e-6*eta of the probe ball surface"),
            Error::Mesh(s) => write!(f, "mesh error: {s}"),
            Error::Singular { index, tau } => {
                write!(f, "singular factorization at pivot {index} (tau = {tau}); system is ill-conditioned")
            }
            Error::Extraction(s) => write!(f, "extraction failed: {s}"),
            Error::NotConverged { achieved } => {
                write!(f, "quadrature did not converge (achieved relative agreement {achieved:e})")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
