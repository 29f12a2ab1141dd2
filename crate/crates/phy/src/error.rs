use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhyError {
    #[error("invalid frame config `{field}`: {msg}")]
    Config { field: &'static str, msg: String },
    #[error("bit at index {index} has value {value}, expected 0 or 1")]
    NonBinary { index: usize, value: u8 },
    #[error("frame length mismatch: expected {expected} samples, got {got}")]
    FrameLength { expected: usize, got: usize },
    #[error("zero pilot at subcarrier {subcarrier}, transmit antenna {tx}")]
    ZeroPilot { subcarrier: usize, tx: usize },
    #[error("channel matrix is rank deficient at subcarrier {subcarrier}")]
    RankDeficient { subcarrier: usize },
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = PhyError> = std::result::Result<T, E>;
