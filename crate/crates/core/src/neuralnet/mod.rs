//! Small feed-forward and recurrent networks with hand-written gradients.
//!
//! Parameters live in one flat `Vec<f64>`; every layer owns a contiguous
//! slice of it. Dense products go through `matrixmultiply::dgemm`.

mod gradcheck;
mod linalg;
mod net;
mod spec;
mod tensor;
mod train;

use thiserror::Error;

pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use net::{Loss, Network};
pub use spec::{ModelKind, ModelSpec};
pub use tensor::Tensor;
pub use train::{train, train_with, Hyper, Optimizer, TrainedModel, MODEL_FORMAT, MODEL_FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Divergence { epoch: usize },
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("model file: {0}")]
    Format(String),
}
