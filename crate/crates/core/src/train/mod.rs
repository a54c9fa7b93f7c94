//! Objective, optimizer and training loop.

pub mod adamw;
pub mod loss;
pub mod trainer;

pub use adamw::{AdamW, AdamWConfig};
pub use loss::{sample_loss_grad, smooth_labels, smoothed_target, weighted_ce, weighted_ce_grad};
pub use trainer::{predict, stream_rng, train, train_checkpoint, train_from, Selection, TrainConfig, TrainHistory, Trained};
