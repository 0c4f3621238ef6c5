use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed model document: {0}")]
    Parse(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("invalid state labels: {0}")]
    InvalidLabels(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("damping ratio undefined for a zero eigenvalue")]
    ZeroEigenvalue,
    #[error("eigenvector matrix is ill-conditioned (condition estimate {0:e})")]
    DefectiveMatrix(f64),
    #[error("zero vector in loop selection index ({0})")]
    ZeroVector(&'static str),

    #[error("invalid two-area parameters: {0}")]
    InvalidParams(String),
    #[error("calibration failed: residual {residual:e} after {iterations} iterations")]
    CalibrationFailed { residual: f64, iterations: usize },

    #[error("pair is not detectable: unobservable mode at {re:+e}{im:+e}i")]
    NotDetectable { re: f64, im: f64 },
    #[error("decay rate {alpha} infeasible: unobservable mode at real part {re:+e}")]
    RateInfeasible { alpha: f64, re: f64 },
    #[error("matrix is not Hurwitz (spectral abscissa {0:+e})")]
    NotHurwitz(f64),
    #[error("ill-conditioned Lyapunov solve: {0}")]
    IllConditioned(String),
    #[error("Riccati solve failed: {0}")]
    RiccatiFailure(String),
    #[error("unknown-input observer does not exist: {0}")]
    UioExistence(String),

    #[error("matrix exponential overflowed")]
    Overflow,
    #[error("time grid misaligned: {0}")]
    GridMisaligned(String),
    #[error("closed loop diverged at t = {0} s")]
    UnstableClosedLoop(f64),

    #[error("no stabilizing gain in the supplied grid")]
    NoStabilizingGain,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
