use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension {0} out of range (need d >= 1)")]
    Dimension(usize),
    #[error("torus side {0} too small (need r >= 3)")]
    Side(u64),
    #[error("spread-out range L={range} needs 2L+1 <= r (r={side})")]
    Range { range: u32, side: u64 },
    #[error("index overflow: {0}")]
    Overflow(String),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("no reference p_c for d={d}, model={model}")]
    NoReference { d: usize, model: String },
    #[error("malformed reference table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("malformed cycle: {0}")]
    MalformedCycle(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("size guard exceeded: {0}")]
    Guard(String),
    #[error("coupling sample is truncated; property check inapplicable")]
    Truncated,
}
