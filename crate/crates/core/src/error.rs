use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid threshold schedule: {0}")]
    Schedule(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("stratum index {index} out of range 1..={strata}")]
    StratumOutOfRange { index: usize, strata: usize },

    #[error("iteration {index} out of range 1..={iterations}")]
    IterationOutOfRange { index: usize, iterations: usize },

    #[error("empty particle subset below threshold {threshold}")]
    EmptySubset { threshold: f64 },

    #[error(
        "proposal cap of {cap} exceeded at iteration {iteration} with {accepted} of {wanted} particles accepted"
    )]
    ProposalCap {
        iteration: usize,
        accepted: usize,
        wanted: usize,
        cap: u64,
    },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
