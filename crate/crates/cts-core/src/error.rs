use thiserror::Error;

/// Errors produced by the core pipeline.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("no usable transaction records after filtering")]
    NoUsableRecords,

    #[error("no regular nodes: intersection across {weeks} weekly networks is empty")]
    NoRegularNodes { weeks: usize },

    #[error("week {week} has no price observations")]
    EmptyPriceWeek { week: usize },

    #[error("price dates must be strictly increasing: violation at line {line}")]
    UnsortedPrices { line: u64 },

    #[error("network for week {week} has no edges")]
    EmptyNetwork { week: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("duplicate seeds in ensemble")]
    DuplicateSeeds,

    #[error("embedding failed for week {week}: {source}")]
    WeekEmbedding {
        week: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("center week {center} outside valid range [{lo}, {hi}]")]
    CenterOutOfRange { center: usize, lo: usize, hi: usize },

    #[error("series too short: {len} weeks but window needs {window}")]
    ShortSeries { len: usize, window: usize },

    #[error("all (node, component) pairs dropped: every window row has zero variance")]
    AllPairsDropped,

    #[error("tensor of {bytes} bytes exceeds memory cap of {cap} bytes")]
    MemoryCap { bytes: usize, cap: usize },

    #[error("insufficient overlap: {n} paired samples, need at least {min}")]
    InsufficientOverlap { n: usize, min: usize },

    #[error("zero variance in correlation input")]
    ZeroVariance,

    #[error("{count} of {total} values outside the analytic support [0, {max:.6}]")]
    OutsideSupport {
        count: usize,
        total: usize,
        max: f64,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("embedding cache: {0}")]
    CacheFormat(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
