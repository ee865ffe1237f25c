use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image has zero pixels")]
    EmptyImage,
    #[error("document has no text pixels")]
    EmptyMask,
    #[error("raster shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("degenerate graph: {0}")]
    DegenerateGraph(&'static str),
    #[error("line {0} has zero total responsibility")]
    DegenerateLine(usize),
    #[error("non-finite belief at vertex {vertex} after sweep {sweep}")]
    NonFiniteBelief { vertex: usize, sweep: usize },
    #[error("state space too large: {0} configurations")]
    StateSpaceTooLarge(f64),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = core::result::Result<T, Error>;
