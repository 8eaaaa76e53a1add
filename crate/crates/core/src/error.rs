use thiserror::Error;

/// Errors produced by the simulation engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: max |A - A^H| entry is {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not square: {rows} rows, row {row} has {cols} entries")]
    NotSquare { rows: usize, row: usize, cols: usize },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("cannot normalize a vector of norm {norm:e}")]
    ZeroNorm { norm: f64 },

    #[error("expectation value has imaginary part {imag:e}; operator is not Hermitian enough")]
    NotReal { imag: f64 },

    #[error("time {t} outside model domain [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("levels {a} and {b} are degenerate at t = {t} (gap {gap:e})")]
    Degenerate { t: f64, a: usize, b: usize, gap: f64 },

    #[error("gauge tracking lost at t = {t}: level {level} best overlap {overlap:.3} < 0.5; use a smaller grid step")]
    GaugeLost { t: f64, level: usize, overlap: f64 },

    #[error("level index {level} out of range for dimension {dim}")]
    LevelOutOfRange { level: usize, dim: usize },

    #[error("invalid control configuration: {0}")]
    InvalidControl(String),

    #[error("control operator {index} does not commute with H0 at t = {t} (norm {norm:e})")]
    NonCommuting { index: usize, t: f64, norm: f64 },

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn at(self, t: f64) -> Error {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime {
                t,
                source: Box::new(e),
            },
        }
    }

    /// Strips any time-stamp wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
