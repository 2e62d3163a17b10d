//! The BiLSTM-CRF tagger: feature assembly, training and checkpoints.

mod checkpoint;
mod config;
mod tagger;
mod train;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::ModelConfig;
pub use tagger::{DocFeatures, Prediction, Tagger};
pub use train::{dev_pk, predict_corpus, train, EpochRecord, Protocol, TrainOptions, TrainOutcome};
