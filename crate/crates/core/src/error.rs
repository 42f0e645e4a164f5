use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("input signal is empty")]
    EmptyInput,
    #[error("invalid sample rate {0} Hz")]
    InvalidRate(u32),
    #[error("invalid frame spec: {0}")]
    InvalidFrameSpec(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("line {line}: label {label:?} is not in the phoneme inventory")]
    UnknownLabel { label: String, line: usize },
    #[error("line {line}: malformed alignment ({reason})")]
    MalformedAlignment { line: usize, reason: String },
    #[error("line {line}: negative time")]
    NegativeTime { line: usize },
    #[error("invalid phoneme inventory: {0}")]
    InvalidInventory(String),
    #[error("no phoneme slot has enough frames to estimate an RTF")]
    NoSlotAvailable,
    #[error("incompatible accumulators: {0}")]
    IncompatibleAccumulators(String),
    #[error("incompatible model: {0}")]
    IncompatibleModel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("direction index {index} out of range for {count} directions")]
    InvalidDirection { index: usize, count: usize },
    #[error("{0} is silent")]
    SilentSignal(&'static str),
    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("unsupported file version {found} (supported: {supported})")]
    VersionMismatch { found: u16, supported: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
