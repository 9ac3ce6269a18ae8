//! Error type shared by all analysis modules.

use thiserror::Error;

/// Errors reported by model construction and the numerical routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A physical or mathematical precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A scan did not bracket the feature it was looking for.
    #[error("diagnostic error: {0}")]
    Diagnostic(String),

    /// An iterative solver failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A continuation branch could not be corrected after repeated step halving.
    #[error("root-locus branch {branch} lost at tau = {tau:.6e}: {detail}")]
    BranchLost {
        branch: usize,
        tau: f64,
        detail: String,
    },

    /// The admittance has no imaginary-axis crossing for any positive delay.
    #[error("no finite critical delay exists for this configuration")]
    NoFiniteCriticalDelay,

    /// A pole sits on a zero of the admittance numerator or denominator sum.
    #[error("singular configuration: {0}")]
    SingularConfiguration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
