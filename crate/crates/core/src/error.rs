use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is not a power of two >= 2")]
    InvalidDimension(usize),

    #[error("condition number must be >= 1, got {0}")]
    InvalidKappa(f64),

    #[error("matrix is singular: infinite condition number (sigma_min = {0:e})")]
    Singular(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("instance kind mismatch: expected {expected}")]
    WrongKind { expected: &'static str },

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("matrix market parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("block encoding residual {0:e} exceeds tolerance")]
    BlockEncoding(f64),

    #[error("solution overlap with the H(1) null space is {0:e}; target is ambiguous")]
    DegenerateTarget(f64),

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("interpolation: {0}")]
    Interpolation(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    range: &'static str,
    ok: bool,
) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, range })
    }
}
