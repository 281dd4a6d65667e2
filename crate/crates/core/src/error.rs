use thiserror::Error;

/// Errors raised by the block-circulant algebra, estimators and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    Dimension(String),

    #[error("period N = {period} must be even and at least 2")]
    OddPeriod { period: usize },

    #[error("bandwidth {bandwidth} too wide for period {period} (need N > 2n)")]
    BandTooWide { bandwidth: usize, period: usize },

    #[error("inverse transform left an imaginary residue of {residue:e}")]
    ImaginaryResidue { residue: f64 },

    #[error("symbol block at frequency index {index} is singular")]
    SingularSymbol { index: usize },

    #[error("matrix is not positive definite (symbol block {index})")]
    NotPositiveDefinite { index: usize },

    #[error("spectral density is singular at theta = {theta}")]
    SingularAtFrequency { theta: f64 },

    #[error("need more than {lag} samples, got {samples}")]
    InsufficientSamples { samples: usize, lag: usize },

    #[error("requested density yields a diagonal-only support")]
    DegenerateDensity,

    #[error("line search stalled below step {step:e}")]
    LineSearchStalled { step: f64 },

    #[error("no convergence after {iterations} iterations")]
    MaxIterations { iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
