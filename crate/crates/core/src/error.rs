use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("pole of the gamma function at {0}")]
    Pole(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("series did not converge within {terms} terms ({context})")]
    NonConvergence { terms: usize, context: String },

    #[error("matrix is singular to working precision (pivot modulus {0:e})")]
    Singular(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid channel configuration: {0}")]
    Config(String),

    #[error("kernel routes disagree: closed form {closed}, quadrature {quadrature}, relative gap {gap:e}")]
    KernelMismatch {
        closed: String,
        quadrature: String,
        gap: f64,
    },

    #[error("numerical differentiation residue {residue:e} exceeds {limit:e} for moment {order}")]
    Differentiation { order: usize, residue: f64, limit: f64 },

    #[error("automatic cut-off search exceeded L = {0}")]
    Cutoff(f64),

    #[error("Fourier inversion inadequate: {0}")]
    Inversion(String),

    #[error("root bracket not found: {0}")]
    NoBracket(String),

    #[error("ensemble is degenerate: {0}")]
    Degenerate(String),

    #[error("empty comparison mask: {0}")]
    EmptyMask(String),
}

impl Error {
    /// True for failures that come from a numerical consistency check rather
    /// than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::Singular(_)
                | Error::KernelMismatch { .. }
                | Error::Differentiation { .. }
                | Error::Cutoff(_)
                | Error::Inversion(_)
                | Error::NoBracket(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
