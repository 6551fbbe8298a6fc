//! Fine-tuning heads over embeddings from an external pre-trained speech
//! model, trained with hand-written backpropagation.

mod embedding;
mod heads;
mod layers;
mod train;

pub use embedding::{
    load_embedding_matrix, load_embedding_set, write_embedding_matrix, EmbeddingMatrix,
};
pub use heads::{BatchCache, ConvConfig, ConvHead, Head, MlpConfig, MlpHead, Mode};
pub use layers::{Activation, BatchNorm, BnCache, Conv1d, Dense, BN_EPS, BN_MOMENTUM};
pub use train::{
    batch_loss, gradient_check, loss_gradients, train_head, Optimizer, TrainConfig, TrainOutcome,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("bad embedding format: {0}")]
    BadFormat(String),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("no training data")]
    EmptyData,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
