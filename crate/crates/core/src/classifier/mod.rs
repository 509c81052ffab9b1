//! The lightweight classifier and its diagnostics.
//!
//! Texts are mapped to fixed feature vectors (hashed n-grams, or a remote
//! sentence embedding) and a multinomial logistic head is fit by full-batch
//! gradient descent from zero initialization. [`evaluate`] produces the
//! report the Analyze step consumes.

mod embed;
mod eval;
mod featurize;
mod model;

use thiserror::Error;

pub use embed::{embed_batch, RemoteEmbedder};
pub use eval::{evaluate, evaluate_with, ErrorTrace, EvalReport, ScoredItem, TRACES_PER_CLASS};
pub use featurize::{
    build_featurizer, featurize, fnv1a_64, Featurizer, FeaturizerKind, FeaturizerSpec, HashedNgram, SparseVector,
    DEFAULT_HASH_DIMENSION, FNV1A_64,
};
pub use model::{argmax, loss_and_gradient, softmax, train, train_with, Gradient, Model, Prediction, TrainConfig};

use crate::llm::ProviderError;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains fewer than two distinct labels")]
    DegenerateTrainingSet,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}
