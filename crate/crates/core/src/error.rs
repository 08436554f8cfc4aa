use thiserror::Error;

/// Errors raised by the model, the estimators and the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A measure that must have positive mean (or positive mass) does not.
    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    /// Root bracketing, quadrature or normalisation failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The backward recursion did not settle before the depth cap.
    ///
    /// `mass_upper` is the mass at `h` at the cap; by monotonicity the true
    /// condensate lies in `[0, mass_upper]`.
    #[error("backward recursion did not converge within depth {depth} (condensate in [0, {mass_upper:e}])")]
    NonConvergence { depth: usize, mass_upper: f64 },

    /// Caller misuse: wrong lengths, undersized samples, invalid parameters.
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid or inconsistent experiment configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
