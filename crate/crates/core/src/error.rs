use thiserror::Error;

/// Errors raised by the library. Most operations are total; these cover
/// malformed inputs and the one semantic refusal (robust evaluation of a
/// mechanism whose revenue is not a separable function of top order
/// statistics).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("negative support value {0}; auction values must be non-negative")]
    NegativeSupport(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("mechanism `{0}` is not a top-k order-statistic mechanism; its worst case over the ambiguity set is not attained at the consistent i.i.d. distribution")]
    NotSeparable(String),

    #[error("mechanism is in T_{class} but only the {k}-th order statistic is known (need class <= k)")]
    ClassExceedsInformation { class: usize, k: usize },

    #[error("enumeration guard exceeded: {outcomes} outcomes > {limit}")]
    GuardExceeded { outcomes: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
