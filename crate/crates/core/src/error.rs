use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("truncated mass {mass:.3e} exceeds cap {cap:.3e}; enlarge the domain")]
    Truncation { mass: f64, cap: f64 },
    #[error("spectral samples are not Hermitian (defect {defect:.3e} > {tol:.3e})")]
    Symmetry { defect: f64, tol: f64 },
    #[error("grid mismatch: {0}")]
    Grid(String),
    #[error("k-window error: {0}")]
    Window(String),
    #[error("moment of order {order} diverges (fitted tail index {tail_index:.3})")]
    DivergentMoment { order: usize, tail_index: f64 },
    #[error("argument outside domain: {0}")]
    Domain(String),
    #[error("inadmissible stable parameters: {0}")]
    Param(String),
    #[error("spectrum is delta-like (point mass at x = {shift}); no L1 density exists")]
    DeltaLike { shift: f64 },
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("small-k fit failed: {0}")]
    Fit(String),
    #[error("probe points inside the core region: {0}")]
    Probe(String),
    #[error("|cf| = {modulus:.6} exceeds 1 at step {step}; aliasing suspected")]
    Stability { step: usize, modulus: f64 },
    #[error("i/o: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad input configuration rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Grid(_)
                | Error::Window(_)
                | Error::Domain(_)
                | Error::Param(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
