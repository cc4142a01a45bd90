use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("conditioning cell {0} has zero probability mass")]
    DegenerateCell(String),

    #[error("positivity violated at {location}: probability {value}")]
    Positivity { location: String, value: f64 },

    #[error("rejection sampler exhausted {attempts} attempts at row {row}")]
    SamplerExhausted { row: usize, attempts: usize },

    #[error("complete separation detected after {iterations} iterations (max |coef| = {max_coef:.2})")]
    Separation { iterations: usize, max_coef: f64 },

    #[error("design is rank deficient at column {column} ({name})")]
    RankDeficient { column: usize, name: String },

    #[error("IRLS did not converge in {iterations} iterations (gradient max-norm {gradient:e})")]
    NotConverged { iterations: usize, gradient: f64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("treatment group {group} is empty or carries zero weight")]
    GroupEmpty { group: u8 },

    #[error("fit error: cell {0} is empty")]
    EmptyCell(String),

    #[error("imputation support error: no complete cases in cell {0}")]
    ImputationSupport(String),

    #[error("imputation {index}: {source}")]
    Imputation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_imputation(self, index: usize) -> Self {
        Error::Imputation {
            index,
            source: Box::new(self),
        }
    }
}
