use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown phone label `{0}`")]
    UnknownLabel(String),

    #[error("utterance `{utterance}` assigned to both `{first}` and `{second}`")]
    ConflictingSpeaker {
        utterance: String,
        first: String,
        second: String,
    },

    #[error("utterances missing from utt2spk: {}", .0.join(", "))]
    MissingSpeakers(Vec<String>),

    #[error("duplicate utterance id `{0}`")]
    DuplicateUtterance(String),

    #[error("utterance `{utterance}`: {msg}")]
    InvalidUtterance { utterance: String, msg: String },

    #[error("unknown utterance id `{0}`")]
    UnknownUtterance(String),

    #[error("tier `{wanted}` not found; available tiers: {}", .available.join(", "))]
    MissingTier {
        wanted: String,
        available: Vec<String>,
    },

    #[error("utterance group has no mapped phone segments")]
    EmptyGroup,

    #[error("degenerate profile: vector is zero after normalization")]
    DegenerateProfile,

    #[error("component {index} is not positive ({value})")]
    NonPositive { index: usize, value: f64 },

    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("no expected duration for phone class `{0}`")]
    UndefinedExpected(String),

    #[error("score list is empty")]
    EmptyScores,

    #[error("score is not a number")]
    NanScore,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error("cache format version {found} does not match {expected}")]
    CacheVersion { found: u32, expected: u32 },

    #[error("grid cell (m={m}, min_instances={min_instances}): {source}")]
    GridCell {
        m: usize,
        min_instances: u32,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
