use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: expected {expected} slots, got {got}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error("filter divergence at tick {tick}: every particle has zero likelihood for observation {observation}")]
    FilterDivergence { tick: usize, observation: String },

    #[error("refit needs at least 2 elites, got {0}")]
    TooFewElites(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("episode {run} failed: {source}")]
    Episode {
        run: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config serialization error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
