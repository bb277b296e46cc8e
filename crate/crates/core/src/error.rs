use thiserror::Error;

/// Failures raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is outside the supported range 2..=64")]
    UnsupportedDimension(usize),

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation of U^dag U from I is {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("non-finite value encountered")]
    NonFinite,

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("degenerate spectrum at t = {t} (sample {sample}): gap {gap:e}")]
    Degenerate { sample: usize, t: f64, gap: f64 },

    #[error(
        "level crossing suspected at t = {t} (sample {sample}), level {level}: overlap {overlap}"
    )]
    LevelCrossing {
        sample: usize,
        t: f64,
        level: usize,
        overlap: f64,
    },

    #[error("level index {index} out of range for dimension {dim}")]
    LevelOutOfRange { index: usize, dim: usize },

    #[error("sample index {index} out of range ({len} samples)")]
    SampleOutOfRange { index: usize, len: usize },

    #[error("levels m and n must differ (both {0})")]
    SameLevel(usize),

    #[error("energy gap between levels {m} and {n} vanishes")]
    ZeroGap { m: usize, n: usize },

    #[error("quantity undefined because E_{level} = 0")]
    ZeroEnergy { level: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("model does not provide analytic eigenvectors")]
    NoAnalyticEigenvectors,

    #[error("scenario: {0}")]
    Config(String),

    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

impl Error {
    /// Degeneracy, crossing and convergence failures, as opposed to misuse of the API.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::Degenerate { .. }
                | Error::LevelCrossing { .. }
                | Error::NonFinite
                | Error::ZeroGap { .. }
                | Error::NotUnitary { .. }
        )
    }

    /// Problems with the scenario document or the output location.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Io { .. }
                | Error::InvalidParameter { .. }
                | Error::InvalidGrid(_)
                | Error::UnsupportedDimension(_)
                | Error::LevelOutOfRange { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
