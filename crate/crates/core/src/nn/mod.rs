//! Classifiers and their hand-written gradients.

pub mod checkpoint;
pub mod encoder;
pub mod gradcheck;
pub mod lstm;
pub mod mineroi;
pub mod mixing;
pub mod ops;
pub mod params;
pub mod spectral;

use std::fmt;
use std::sync::Arc;

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use lstm::{LstmConfig, LstmNet};
pub use mineroi::{ForwardTrace, MineRoiNet, ModelConfig};
pub use params::{Layout, ParamId, Params};
pub use spectral::SpectralMode;

pub const NUM_CLASSES: usize = 3;

/// Architecture tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MineRoi,
    Lstm,
}

impl ModelKind {
    pub fn tag(self) -> u8 {
        match self {
            ModelKind::MineRoi => 1,
            ModelKind::Lstm => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(ModelKind::MineRoi),
            2 => Some(ModelKind::Lstm),
            _ => None,
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::MineRoi => "MineROI-Net",
            ModelKind::Lstm => "LSTM-baseline",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// A three-class sequence classifier with per-sample forward and backward passes.
///
/// Implementations are immutable; parameters live in a separate [`Params`]
/// so one model can serve many parameter sets (optimizer state, finite
/// differences, independent seeds).
pub trait Classifier: Send + Sync {
    type Trace: Send + Sync;

    fn kind(&self) -> ModelKind;

    fn layout(&self) -> &Arc<Layout>;

    /// `(L, F)` expected for each input sample.
    fn input_shape(&self) -> (usize, usize);

    /// Dropout probability used in training mode.
    fn dropout(&self) -> f64;

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Params;

    fn init_seeded(&self, seed: u64) -> Params {
        self.init_params(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// Runs one `L×F` sample. Dropout is applied only when `dropout_rng` is given.
    fn forward_sample(&self, params: &Params, x: ArrayView2<f64>, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Self::Trace>;

    fn logits(trace: &Self::Trace) -> [f64; NUM_CLASSES];

    /// Accumulates parameter gradients of one sample into `grads`.
    fn backward_sample(&self, params: &Params, trace: &Self::Trace, grad_logits: [f64; NUM_CLASSES], grads: &mut Params);
}
