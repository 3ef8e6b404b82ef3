use thiserror::Error;

use crate::featurize::FeatureError;
use crate::ingest::IngestError;
use crate::neuralnet::NetError;
use crate::tasks::TaskError;

/// Top-level error for pipeline entry points that cross module boundaries.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
