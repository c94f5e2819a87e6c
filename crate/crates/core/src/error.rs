use crate::precoding::PrecoderKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A channel (or channel estimate) carries no energy at all.
    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    /// The channel estimate matrix is too ill-conditioned to invert.
    #[error("singular channel: condition number {condition:.3e} exceeds {limit:.0e}")]
    SingularChannel { condition: f64, limit: f64 },

    #[error("trace holds {available} distinct angles but {requested} users were requested")]
    InsufficientTrace { requested: usize, available: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("K={users} frontend={frontend} realization={realization}: {source}")]
    Campaign {
        users: usize,
        frontend: String,
        realization: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("precoder {kind} failed: {source}")]
    Precoder {
        kind: PrecoderKind,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures that the campaign records and skips instead of aborting.
    pub fn is_singular(&self) -> bool {
        match self {
            Error::SingularChannel { .. } => true,
            Error::Precoder { source, .. } | Error::Campaign { source, .. } => source.is_singular(),
            _ => false,
        }
    }
}
