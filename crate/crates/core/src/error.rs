use thiserror::Error;

/// Error type shared across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),
    #[error("singular effective channel: {0}")]
    SingularChannel(String),
    #[error("degenerate beampattern: desired gains are all zero")]
    DegeneratePattern,
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("zero rate for user {0}")]
    ZeroRate(usize),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numeric failures and everything else that happens mid-run.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGeometry(_) | Error::Io { .. } => 2,
            _ => 3,
        }
    }
}
