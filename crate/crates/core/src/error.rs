use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rotation factor K at lag {lag} is rank deficient")]
    Singular { lag: usize },

    #[error("ill-conditioned intermediate at lag {lag}: {detail}")]
    Conditioning { lag: usize, detail: String },

    #[error("expected rank {expected}, found {found}")]
    Rank { expected: usize, found: usize },

    #[error("process is not causal (companion spectral radius {radius})")]
    NonCausal { radius: f64 },

    #[error("dense oracle size guard exceeded: T*d = {size} > {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("initial log-posterior is not finite: {0}")]
    Init(String),

    #[error("precision generation failed: {0}")]
    Generation(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
