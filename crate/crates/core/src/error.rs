use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series do not share a common span of at least one {target_dt} s window")]
    EmptyOverlap { target_dt: f64 },
    #[error("non-finite sample in {what}")]
    NonFinite { what: String },
    #[error("channel `{0}` is constant over the training set")]
    ConstantChannel(String),
    #[error("channel `{channel}` missing from session `{session}`")]
    MissingChannel { session: String, channel: String },
    #[error("model channels {expected:?} do not match data channels {found:?}")]
    ChannelMismatch {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown content id `{0}`")]
    UnknownContent(String),
    #[error("session `{0}` has no subjective trace")]
    MissingSubjective(String),
    #[error("series of length {len} too short for lags (first predictable index {t_min})")]
    TooShort { len: usize, t_min: usize },
    #[error("warm-up has {got} samples, need {need}")]
    InsufficientWarmup { got: usize, need: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("constant input to correlation")]
    ConstantInput,
    #[error("forecasts belong to different sessions (`{0}` and `{1}`)")]
    MixedSessions(String, String),
    #[error("every training job failed")]
    AllFailed,
    #[error("damped normal equations are singular")]
    SingularNormalEquations,
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed {what}: {msg}")]
    Parse { what: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure classes, used for process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::AllFailed | Error::SingularNormalEquations => ErrorClass::Numerical,
            Error::Io { .. } => ErrorClass::Io,
            Error::InvalidArgument(_) => ErrorClass::Usage,
            _ => ErrorClass::Validation,
        }
    }

    /// Short stable identifier, printed before the human-readable message.
    pub fn code_name(&self) -> &'static str {
        match self {
            Error::EmptyOverlap { .. } => "empty_overlap",
            Error::NonFinite { .. } => "non_finite",
            Error::ConstantChannel(_) => "constant_channel",
            Error::MissingChannel { .. } => "missing_channel",
            Error::ChannelMismatch { .. } => "channel_mismatch",
            Error::UnknownContent(_) => "unknown_content",
            Error::MissingSubjective(_) => "missing_subjective",
            Error::TooShort { .. } => "too_short",
            Error::InsufficientWarmup { .. } => "insufficient_warmup",
            Error::LengthMismatch(..) => "length_mismatch",
            Error::Empty => "empty",
            Error::ConstantInput => "constant_input",
            Error::MixedSessions(..) => "mixed_sessions",
            Error::AllFailed => "all_failed",
            Error::SingularNormalEquations => "singular_normal_equations",
            Error::InvalidFrame(_) => "invalid_frame",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
        }
    }
}
