use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("zero matrix: {0}")]
    ZeroMatrix(&'static str),
    #[error("requires positive matrix")]
    NotPositive,
    #[error("annihilated at step {step}")]
    Annihilated { step: usize },
    #[error("requires (E) factors: A_{index} has non-nested column supports")]
    RequiresE { index: usize },
    #[error("window too short: {0}")]
    Unstabilized(String),
    #[error("verification failed for k={k}, k'={k2}, block ({h},{l}): {what}")]
    Verification { k: usize, k2: usize, h: usize, l: usize, what: String },
    #[error("unconverged: {0}")]
    Unconverged(String),
    #[error("parse error at {at}: {msg}")]
    Parse { at: String, msg: String },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
