use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("degenerate design: normal-equations matrix is singular (pivot ratio {ratio:e})")]
    DegenerateDesign { ratio: f64 },

    #[error("positive cell {cell} is empty; the chi-square statistic is undefined (coarsen the partition or enlarge n)")]
    EmptyPositiveCell { cell: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("numeric integration failed: {0}")]
    NumericIntegration(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{excluded} of {replications} replications hit an empty positive cell (limit is 1%)")]
    ExcessiveEmptyCells {
        excluded: usize,
        replications: usize,
    },

    #[error("cache file {path}: {message}")]
    Cache { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Errors caused by the caller's input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidSize(_)
                | Error::Domain(_)
                | Error::Config { .. }
                | Error::Cache { .. }
                | Error::Io(_)
        )
    }
}
