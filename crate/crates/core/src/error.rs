use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovError {
    #[error("dimension mismatch: {context} (expected {expected}, got {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not PSD: eigenvalue {eigenvalue:e} below tolerance -{threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("matrix is singular: eigenvalue {eigenvalue:e} where a strictly positive spectrum is required")]
    Singular { eigenvalue: f64 },

    #[error(
        "symmetric eigensolver did not converge (n = {n}, frobenius norm {frobenius_norm:e}, max |entry| {max_abs:e})"
    )]
    EigenNoConvergence {
        n: usize,
        frobenius_norm: f64,
        max_abs: f64,
    },

    #[error("matrix is not factorizable: cholesky failed at every jitter level up to {max_jitter:e}")]
    NotFactorizable { max_jitter: f64 },

    #[error("non-real spectrum: eigenvalue {re:e} {im:+e}i exceeds the imaginary-part tolerance")]
    NonRealSpectrum { re: f64, im: f64 },

    #[error("log-det undefined: eigenvalue {eigenvalue:e} <= -1")]
    LogDetUndefined { eigenvalue: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, CovError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(CovError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
