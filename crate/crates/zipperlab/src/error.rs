//! Error taxonomy for the whole laboratory.
//!
//! Every failure mode named in an operation contract maps to one variant
//! here. Estimator drivers additionally distinguish "a trial failed and was
//! discarded" (counted, budgeted) from "the experiment is invalid" (fatal).

use thiserror::Error;

/// Which of the invertibility-critical Schur quantities degenerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurQuantity {
    E,
    F,
    BuMinusA,
    BuPlusA,
    DuMinusC,
    DuPlusC,
    Wronskian,
}

impl std::fmt::Display for SchurQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SchurQuantity::E => "E",
            SchurQuantity::F => "F",
            SchurQuantity::BuMinusA => "B*U - A",
            SchurQuantity::BuPlusA => "B*U + A",
            SchurQuantity::DuMinusC => "D*U - C",
            SchurQuantity::DuPlusC => "D*U + C",
            SchurQuantity::Wronskian => "wronskian",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Error)]
pub enum ZipperError {
    #[error("matrix defect parameter has operator norm {norm} >= 1")]
    NormTooLarge { norm: f64 },

    #[error("upper-right block numerically singular (smallest singular value {sigma_min:.3e})")]
    SingularBeta { sigma_min: f64 },

    #[error("spectral parameter z must be nonzero")]
    ZeroSpectralParameter,

    #[error("disorder window [{have_lo},{have_hi}] does not cover required sites [{need_lo},{need_hi}]")]
    InsufficientWindow {
        need_lo: i64,
        need_hi: i64,
        have_lo: i64,
        have_hi: i64,
    },

    #[error("cocycle factor not invertible at working precision (step {step})")]
    DegenerateCocycle { step: usize },

    #[error("exterior power supports dimension <= 8, got {dim}")]
    DimensionTooLarge { dim: usize },

    #[error("interval [{a},{b}] is empty or too short")]
    EmptyInterval { a: i64, b: i64 },

    #[error("boundary matrix departs from unitarity by {defect:.3e}")]
    BoundaryNotUnitary { defect: f64 },

    #[error("operator was not built from an even-start window (starts at {a})")]
    ParityMismatch { a: i64 },

    #[error("dimension mismatch: operator expects {expected}, state has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("window [{a},{b}] too small: support must stay {required} blocks from both ends, has {actual}")]
    WindowTooSmall {
        a: i64,
        b: i64,
        required: i64,
        actual: i64,
    },

    #[error("split index {split} not strictly inside [{a},{b}] or parity tag mismatched")]
    SplitOutOfRange { split: i64, a: i64, b: i64 },

    #[error("banded solve failed: zero pivot at column {col}")]
    SolveFailure { col: usize },

    #[error("boundary bracket ill-conditioned (smallest singular value {sigma_min:.3e})")]
    IllConditionedE { sigma_min: f64 },

    #[error("gamma block numerically singular at site {site}")]
    SingularGamma { site: i64 },

    #[error("Schur quantity {which} not invertible (smallest singular value {sigma_min:.3e})")]
    InvertibilityViolation {
        which: SchurQuantity,
        sigma_min: f64,
    },

    #[error("alpha must be invertible for this diagnostic (smallest singular value {sigma_min:.3e})")]
    SingularAlpha { sigma_min: f64 },

    #[error("contraction threshold violated: |z|*||a||*(2-sqrt(1-||a||^2))^2/(1-||a||^2) = {value} >= 1 (margin {margin})")]
    ThresholdViolated { value: f64, margin: f64 },

    #[error("quadrature under-resolved: n_theta = {n_theta} < 8*(n+1) = {required}")]
    QuadratureUnderResolved { n_theta: usize, required: usize },

    #[error("phase sample numerically singular (smallest singular value {sigma_min:.3e})")]
    SingularSample { sigma_min: f64 },

    #[error("need at least {required} usable points for a fit, got {got}")]
    InsufficientData { required: usize, got: usize },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("numerical failure budget exceeded: {failed} of {total} trials failed (budget {budget_pct}%)")]
    NumericalFailureBudgetExceeded {
        failed: usize,
        total: usize,
        budget_pct: f64,
    },

    #[error("invariant failure: {0}")]
    InvariantFailure(String),

    #[error("recurrence anchor invalid: {0}")]
    InvalidAnchor(String),

    #[error("serialized operator is malformed: {0}")]
    MalformedSerialization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ZipperError>;
