//! Crate-wide error type.

/// Errors produced by every module in this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("code width mismatch: {left} vs {right} bits")]
    WidthMismatch { left: u32, right: u32 },

    #[error("invalid code width {width}: must be in 1..={max}")]
    InvalidWidth { width: u32, max: u32 },

    #[error("substring count {t} does not divide code width {width}")]
    NotDivisible { width: u32, t: u32 },

    #[error("substring length {s} exceeds the {max}-bit hash-key limit")]
    SubstringTooLong { s: u32, max: u32 },

    #[error("substring index {index} out of range for t={t}")]
    SubstringIndex { index: u32, t: u32 },

    #[error("radius {radius} exceeds {bits} bits")]
    RadiusTooLarge { radius: u32, bits: u32 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("unknown engine '{0}'")]
    UnknownEngine(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
