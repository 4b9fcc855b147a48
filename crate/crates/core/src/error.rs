use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    pub(crate) fn new(field: &'static str, message: impl Into<String>) -> Self {
        Self {
            field,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Every violated constraint of a configuration, reported together.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(Violations),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inconsistent record: measurement at sample {sample} annihilates the distribution")]
    InconsistentRecord { sample: usize },

    #[error("forward and backward distributions have disjoint support")]
    DisjointSupport,

    #[error("photon number reached the truncation edge ({n}) at t = {time} s")]
    TruncationOverflow { n: usize, time: f64 },

    #[error("exponential fit failed: {reason} (init a={init_amplitude}, tau={init_decay_time}, c={init_offset})")]
    FitFailure {
        reason: String,
        init_amplitude: f64,
        init_decay_time: f64,
        init_offset: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Domain(_) => 1,
            Error::Io { .. } => 2,
            Error::InconsistentRecord { .. }
            | Error::DisjointSupport
            | Error::TruncationOverflow { .. }
            | Error::FitFailure { .. } => 3,
        }
    }
}
