use thiserror::Error;

use crate::dataset::DatasetError;
use crate::encoding::EncodingError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::gbtree::GbtError;
use crate::tuner::TunerError;

/// Crate-wide error, one variant per module.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
