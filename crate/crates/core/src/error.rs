use thiserror::Error;

/// Errors produced by construction, validation, and the loss/decode operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtcError {
    #[error("{what} contains a non-finite value at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what} sum {sum} at {location} (expected 1 within {tolerance})")]
    Normalization {
        what: &'static str,
        location: String,
        sum: f64,
        tolerance: f64,
    },

    #[error("{what} value {value} at {location} outside [0, 1]")]
    OutOfRange {
        what: &'static str,
        location: String,
        value: f64,
    },

    #[error("{what} must not be empty")]
    Empty { what: &'static str },

    #[error("alphabet symbol {symbol:?} appears more than once")]
    DuplicateSymbol { symbol: char },

    #[error("symbol {symbol:?} is not part of the alphabet")]
    UnknownSymbol { symbol: char },

    #[error("label may not contain the blank class (index 0)")]
    BlankInLabel,

    #[error("label class {class} out of range for {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    #[error("{what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        actual: String,
    },

    #[error("label needs min_width={min_width} steps but only {available} are available")]
    Infeasible { min_width: usize, available: usize },

    #[error("no gradient exists for an infeasible label (min_width={min_width}, available={available})")]
    InfeasibleGradient { min_width: usize, available: usize },

    #[error("{what} = {actual} exceeds the brute-force size guard ({limit})")]
    SizeGuard {
        what: &'static str,
        limit: usize,
        actual: usize,
    },

    #[error("beam width must be at least 1")]
    BeamWidthZero,

    #[error("expand_simplified requires a simplified transition map")]
    NotSimplified,

    #[error("label of length {label_len} does not fit: capacity is {capacity} symbols for width {width}")]
    LabelTooLong {
        label_len: usize,
        capacity: usize,
        width: usize,
    },

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, CtcError>;
