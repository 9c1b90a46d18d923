use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("invalid thinning vector: {0}")]
    InvalidMask(String),
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("range {range} m violates the near-field model validity r > 2D = {limit} m")]
    NearFieldValidity { range: f64, limit: f64 },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("mainlobe gain is zero; pattern is degenerate")]
    DegenerateMainlobe,
    #[error("matrix is not positive definite")]
    Singular,
    #[error("infeasible: {0}")]
    Infeasible(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}
