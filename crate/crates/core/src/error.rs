use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("entry ({row}, {col}) is outside a {dim}x{dim} matrix")]
    EntryOutOfBounds { row: usize, col: usize, dim: usize },

    #[error("site {site} is outside a system of {dim} sites")]
    SiteOutOfBounds { site: usize, dim: usize },

    #[error("cannot flip the sign of diagonal entry ({0}, {0})")]
    DiagonalFlip(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("permutation is not a bijection on {0} sites")]
    InvalidPermutation(usize),

    #[error("Hamiltonian does not commute with the supplied permutation (residual {residual:e})")]
    SymmetryViolated { residual: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("step size underflow: {steps} steps over [{t0}, {t1}] still above tolerance {tol:e}")]
    StepUnderflow { t0: f64, t1: f64, steps: usize, tol: f64 },

    #[error("schedule conflict at t = {t}: {reason}")]
    ScheduleConflict { t: f64, reason: String },

    #[error("Hamiltonian has a non-finite entry at t = {t}")]
    NonFiniteHamiltonian { t: f64 },

    #[error("objective returned a non-finite value {value} at {point:?}")]
    NonFiniteObjective { value: f64, point: Vec<f64> },

    #[error("site {0} is not a hub")]
    NotAHub(usize),

    #[error("hub {hub} has {count} adjacent dimers, at least two are needed")]
    TooFewDimers { hub: usize, count: usize },

    #[error("no route between dimer {from} and dimer {to}")]
    NoPath { from: usize, to: usize },

    #[error("timeline conflict: {0}")]
    TimelineConflict(String),
}
