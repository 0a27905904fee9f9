use thiserror::Error;

use crate::backend::BackendError;
use crate::checkerboard::GridError;
use crate::image::ImageError;
use crate::kmeans1d::ClusterError;

/// Errors from the defense pipeline.
#[derive(Debug, Error)]
pub enum DefenseError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
