use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("coupling generation failed: no admissible triple after {0} redraws")]
    CouplingGeneration(usize),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("area under correlation is not positive ({0})")]
    NonPositiveArea(f64),

    #[error("invalid correlation: clipping removed {0:.3}% of the spectral mass")]
    InvalidCorrelation(f64),

    #[error("incompatible grids: {0}")]
    GridIncompatible(String),

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("bath rate gamma_{k} = {value} is not positive")]
    NonPositiveRate { k: usize, value: f64 },

    #[error("matrix [[{a}, {c}], [{c}, {b}]] is not positive semidefinite")]
    NotPositiveSemidefinite { a: f64, b: f64, c: f64 },

    #[error("trajectory became non-finite at step {step}")]
    BlowUp { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
