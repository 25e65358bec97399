//! One error type for the whole crate. Variants name the contract that was
//! broken rather than the call site, so messages stay useful at the CLI.

use thiserror::Error;

/// Equation family a model or solver is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquationKind {
    Wave,
    Diffusion,
}

impl std::fmt::Display for EquationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EquationKind::Wave => write!(f, "wave"),
            EquationKind::Diffusion => write!(f, "diffusion"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A coefficient profile violates its structural constraints
    /// (too few samples, amplitude not below the mean, fraction out of range, ...).
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// A coefficient value is zero or negative where the model requires E, K, rho > 0.
    #[error("positivity violation: {0}")]
    NonPositive(String),

    /// A scalar or grid argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A model built for one equation family was handed to the other one.
    #[error("equation kind mismatch: expected {expected}, got {got}")]
    KindMismatch {
        expected: EquationKind,
        got: EquationKind,
    },

    /// The explicit time integration produced a non-finite value.
    #[error("unstable run: non-finite state at step {step} (t = {time:.6})")]
    UnstableRun { step: usize, time: f64 },

    /// Not enough points/snapshots/crossings to perform a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The modal amplitude decayed below measurable size before the fit window ended.
    #[error("amplitude underflow: {0}")]
    AmplitudeUnderflow(String),

    /// A relative error was requested against an identically zero reference.
    #[error("reference solution has zero norm; relative error is undefined")]
    ZeroNormReference,

    /// A well-prepared initial condition was requested without a corrector table.
    #[error("well-prepared initial condition requires a corrector table")]
    MissingCorrector,

    /// A textual field descriptor (e.g. `cosine:2,1`) could not be parsed.
    #[error("bad field spec `{spec}`: {reason}")]
    BadFieldSpec { spec: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
