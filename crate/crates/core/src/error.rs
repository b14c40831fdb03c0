use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("solver did not converge after {iterations} iterations (last theta = {theta})")]
    NonConvergence { iterations: usize, theta: f64 },

    #[error("step-halving could not keep theta inside the parameter domain (theta = {theta})")]
    DomainExit { theta: f64 },

    #[error("refit on subsample {index} failed: {source}")]
    SubfitFailure {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} bootstrap refits failed")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("mean second derivative {value:e} is too close to zero")]
    SingularInformation { value: f64 },

    #[error("model does not provide closed-form expectations")]
    MissingExpectations,

    #[error(
        "bias estimate on the {bias} scale cannot correct an estimate on the {estimate} scale"
    )]
    ScaleMismatch {
        bias: &'static str,
        estimate: &'static str,
    },

    #[error("unit {unit} has mean squared alpha-score {value:e}")]
    DegenerateUnit { unit: usize, value: f64 },

    #[error("closed form is only available for orders up to {max}, got {order}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("closed-form split statistic needs an even series length, got {len}")]
    OddLength { len: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("method `{method}` is not available here: {reason}")]
    UnsupportedMethod { method: String, reason: String },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{failed} of {total} replicates failed (limit {limit})")]
    ExcessFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn subfit(index: usize, source: Error) -> Self {
        Error::SubfitFailure {
            index,
            source: Box::new(source),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
