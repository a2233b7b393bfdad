//! A small 1D convolutional autoencoder with a classification head,
//! trained by hand-rolled backpropagation.
//!
//! Everything is single-threaded and allocation-order deterministic: the
//! same seed produces bit-identical parameters after training. Gradients
//! are exact (verified against central finite differences in the test
//! suite), optimization is Adam, and losses are mean squared error for
//! reconstruction and clamped binary cross-entropy for classification.

mod conv;
mod model;
mod params_io;
mod train;

pub use conv::{Conv1d, Tensor};
pub use model::{
    autoencoder_backward, autoencoder_forward, classifier_backward, classifier_forward, predict,
    predict_scores, AeTape, ClassifierTape, ModelParams, HEAD_CHANNELS, HEAD_KERNEL,
    INPUT_CHANNELS, MIN_INPUT_LEN,
};
pub use params_io::{load_params, save_params};
pub use train::{
    bce_loss, train_autoencoder, train_classifier, Adam, TrainConfig, TrainReport, BCE_EPS,
};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("input of {len} samples is shorter than the {MIN_INPUT_LEN}-sample minimum")]
    InputTooShort { len: usize },
    #[error("expected {expected} input channels, found {found}")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("training set is empty")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Diverged { epoch: usize, loss: f64 },
    #[error("parameter file does not describe this model (expected {expected}, found {found})")]
    ArchMismatch { expected: String, found: String },
    #[error("parameter file stores {found} weights, this build uses {expected}")]
    ScalarMismatch {
        expected: &'static str,
        found: String,
    },
    #[error("parameter shapes are internally inconsistent: {0}")]
    ShapeMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
