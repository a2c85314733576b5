use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, propagation, diagnostics and the
/// propagator cache.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "coherent state tail mass {tail:e} beyond P={max_fock} exceeds {tol:e}; \
         use P >= {required}"
    )]
    TailMassTooLarge {
        tail: f64,
        tol: f64,
        max_fock: usize,
        required: usize,
    },

    #[error("Fock level {level} outside truncation 0..={max_fock}")]
    LevelOutOfRange { level: usize, max_fock: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot normalize a zero state")]
    ZeroNorm,

    #[error(
        "Taylor series not converged: last term {last_term_norm:e} > tol {tol:e} \
         (ratio |Q|_1*dt/(N+1) = {ratio:.3}); reduce dt by a factor of {reduction} \
         to dt = {suggested_dt:e}"
    )]
    NotConverged {
        last_term_norm: f64,
        tol: f64,
        ratio: f64,
        reduction: f64,
        suggested_dt: f64,
    },

    #[error("non-finite amplitude after step {step}")]
    NonFinite { step: usize },

    #[error(
        "step propagator fingerprint {found:016x} does not match transfer matrix ({expected:016x})"
    )]
    FingerprintMismatch { expected: u64, found: u64 },

    #[error("transfer matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NonHermitianInput { asymmetry: f64 },

    #[error("eigendecomposition failed its accuracy check: {0}")]
    EigenAccuracy(String),

    #[error("requested {requested} level differences but only {available} are available")]
    LevelCountOutOfRange { requested: usize, available: usize },

    #[error("corrupt cache file {path}: {reason}")]
    CacheCorrupt { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
