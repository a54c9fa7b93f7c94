//! Bitcoin ASIC purchase-day ROI labeling and classification.
//!
//! - [`roi`]: one-year ROI and its three-class label.
//! - [`dataset`]: CSV ingestion, daily features, rolling windows, scaling, split plans.
//! - [`nn`]: the spectral/channel-mixing Transformer classifier and the LSTM baseline.
//! - [`train`]: smoothed weighted cross-entropy, AdamW and the training loop.
//! - [`eval`]: metrics, seed aggregation and expanding-window cross-validation.
//! - [`synth`]: synthetic markets and brute-force oracles.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod nn;
pub mod par;
pub mod roi;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use par::Exec;
