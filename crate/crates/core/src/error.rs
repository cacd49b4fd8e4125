use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction, propagation and estimation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operator must be square with dim >= 1 (got {rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator contains non-finite entries")]
    NonFinite,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hamiltonian is not Hermitian (deviation {deviation:.3e})")]
    NonHermitianHamiltonian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(#[from] DensityViolation),

    #[error("jump operator {channel} is zero")]
    ZeroJumpOperator { channel: usize },

    #[error("Bohr-frequency condition violated (relative residual {residual:.3e}, tolerance {tol:.1e})")]
    BohrConditionViolated { residual: f64, tol: f64 },

    #[error("channel {channel}: {reason}")]
    DetailedBalance { channel: usize, reason: String },

    #[error("channel {channel} has no entropy change assigned")]
    MissingEntropyChange { channel: usize },

    #[error("eigendecomposition did not converge")]
    DecompositionFailed,

    #[error("degenerate steady state: {count} eigenvalues within {threshold:.1e} of zero")]
    DegenerateSteadyState { count: usize, threshold: f64 },

    #[error("no steady state found: {0}")]
    NoSteadyState(String),

    #[error("no-jump factorization residual {residual:.3e} exceeds {tol:.1e}")]
    NoJumpFactorization { residual: f64, tol: f64 },

    #[error("negative time {0}")]
    NegativeTime(f64),

    #[error("window [{start}, {end}] is not inside [0, {horizon}]")]
    InvalidWindow { start: f64, end: f64, horizon: f64 },

    #[error("weight vector has {found} entries but model has {expected} channels")]
    WeightCount { expected: usize, found: usize },

    #[error("observable is not antisymmetric under channel reversal (channel {channel})")]
    NotAntisymmetric { channel: usize },

    #[error("jump-time search did not converge")]
    RootNotConverged,

    #[error("no-jump norm increased to {0} (generator is not dissipative)")]
    NormIncrease(f64),

    #[error("label {label} has zero probability")]
    ZeroProbabilityLabel { label: usize },

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which density-matrix invariant failed and by how much.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DensityViolation {
    #[error("not Hermitian (max |rho - rho^dag| = {0:.3e})")]
    NotHermitian(f64),
    #[error("trace is {0:.12} instead of 1")]
    Trace(f64),
    #[error("negative eigenvalue {0:.3e}")]
    Negative(f64),
    #[error("non-finite entries")]
    NonFinite,
}
