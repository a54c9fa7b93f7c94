//! Mini-batch training with seeded shuffling, dropout streams and epoch selection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{AdamW, AdamWConfig};
use super::loss::{sample_loss_grad, smoothed_target};
use crate::dataset::{class_weights, FeatureOrder, LabeledWindow, Scaler};
use crate::error::{Error, Result};
use crate::eval::metrics::{argmax, metrics, ConfusionMatrix};
use crate::nn::checkpoint::{softmax3, Architecture, Checkpoint};
use crate::nn::{Classifier, LstmNet, MineRoiNet, Params, NUM_CLASSES};
use crate::par::Exec;

/// Samples per gradient chunk. Chunks are reduced in a fixed order, so the
/// summed gradient does not depend on how chunks are scheduled.
pub const GRAD_CHUNK: usize = 8;

const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    ValMacroF1,
    ValAccuracy,
    ValLoss,
    FinalEpoch,
}

fn d_batch() -> usize {
    64
}
fn d_epochs() -> usize {
    20
}
fn d_wd() -> f64 {
    1e-5
}
fn d_lr() -> f64 {
    1e-4
}
fn d_eps() -> f64 {
    0.1
}
fn d_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub max_epochs: usize,
    #[serde(default = "d_wd")]
    pub weight_decay: f64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_eps")]
    pub label_smoothing: f64,
    /// Fitted on the training samples when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<[f64; NUM_CLASSES]>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub selection: Selection,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: d_batch(),
            max_epochs: d_epochs(),
            weight_decay: d_wd(),
            learning_rate: d_lr(),
            label_smoothing: d_eps(),
            class_weights: None,
            seed: d_seed(),
            selection: Selection::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.batch_size == 0 {
            problems.push("batch_size must be at least 1".to_string());
        }
        if self.max_epochs == 0 {
            problems.push("max_epochs must be at least 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            problems.push(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            problems.push(format!("label_smoothing must be in [0, 1), got {}", self.label_smoothing));
        }
        if let Some(w) = self.class_weights {
            if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                problems.push(format!("class weights must be strictly positive, got {w:?}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub val_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub selected_epoch: usize,
}

impl TrainHistory {
    /// `epoch,train_loss,val_loss,val_acc,val_macro_f1`; missing validation values are empty.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from("epoch,train_loss,val_loss,val_acc,val_macro_f1\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                e.epoch,
                e.train_loss,
                opt(e.val_loss),
                opt(e.val_acc),
                opt(e.val_macro_f1)
            );
        }
        s
    }

    pub fn selected(&self) -> &EpochRecord {
        &self.epochs[self.selected_epoch - 1]
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub params: Params,
    pub history: TrainHistory,
    pub class_weights: [f64; NUM_CLASSES],
}

/// A generator for one purpose, keyed by up to three counters.
pub fn stream_rng(seed: u64, stream: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, v) in [seed, stream, a, b].iter().enumerate() {
        key[8 * i..8 * i + 8].copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Evaluation-mode class probabilities.
pub fn predict<M: Classifier>(model: &M, params: &Params, samples: &[LabeledWindow], exec: Exec) -> Result<Vec<[f64; NUM_CLASSES]>> {
    exec.try_map(samples, |s| {
        let t = model.forward_sample(params, s.x.view(), None)?;
        Ok(softmax3(M::logits(&t)))
    })
}

fn check_samples<M: Classifier>(model: &M, samples: &[LabeledWindow], what: &str) -> Result<()> {
    let shape = model.input_shape();
    if let Some(s) = samples.iter().find(|s| s.x.dim() != shape) {
        return Err(Error::shape(format!("{what} sample of shape {:?}, model expects {shape:?}", s.x.dim())));
    }
    Ok(())
}

struct ValScore {
    loss: f64,
    acc: f64,
    macro_f1: f64,
}

fn validate_epoch<M: Classifier>(
    model: &M,
    params: &Params,
    val: &[LabeledWindow],
    targets: &[[f64; NUM_CLASSES]],
    w: &[f64; NUM_CLASSES],
    exec: Exec,
) -> Result<ValScore> {
    let logits = exec.try_map(val, |s| model.forward_sample(params, s.x.view(), None).map(|t| M::logits(&t)))?;
    let mut loss = 0.0;
    for (z, y) in logits.iter().zip(targets) {
        loss += sample_loss_grad(z, y, w)?.0;
    }
    let truth: Vec<usize> = val.iter().map(|s| s.label.index()).collect();
    let pred: Vec<usize> = logits.iter().map(|z| argmax(&softmax3(*z))).collect();
    let m = metrics(&ConfusionMatrix::from_labels(&truth, &pred)?)?;
    Ok(ValScore {
        loss: loss / val.len() as f64,
        acc: m.accuracy,
        macro_f1: m.macro_f1,
    })
}

/// Loss sum and gradient of one mini-batch, each sample scaled by `1/B`.
#[allow(clippy::too_many_arguments)]
fn batch_gradient<M: Classifier>(
    model: &M,
    params: &Params,
    samples: &[LabeledWindow],
    targets: &[[f64; NUM_CLASSES]],
    batch: &[usize],
    w: &[f64; NUM_CLASSES],
    seed: u64,
    step: u64,
    exec: Exec,
) -> Result<(f64, Params)> {
    let inv_b = 1.0 / batch.len() as f64;
    let chunks: Vec<(usize, &[usize])> = batch.chunks(GRAD_CHUNK).enumerate().map(|(i, c)| (i * GRAD_CHUNK, c)).collect();
    let parts = exec.try_map(&chunks, |&(base, idx)| -> Result<(f64, Params)> {
        let mut g = Params::zeros(params.layout().clone());
        let mut loss = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            let mut rng = stream_rng(seed, STREAM_DROPOUT, step, (base + k) as u64);
            let t = model.forward_sample(params, samples[i].x.view(), Some(&mut rng))?;
            let (l, gl) = sample_loss_grad(&M::logits(&t), &targets[i], w)?;
            loss += l;
            model.backward_sample(params, &t, gl.map(|v| v * inv_b), &mut g);
        }
        Ok((loss, g))
    })?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("non-empty batch");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    Ok((loss, grads))
}

/// Trains `model` from `init`. Keeps the parameters of the epoch that is best
/// under `cfg.selection` on `val`, or of the final epoch without validation data.
pub fn train_from<M: Classifier>(
    model: &M,
    init: Params,
    train: &[LabeledWindow],
    val: Option<&[LabeledWindow]>,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<Trained> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set has no samples".into()));
    }
    let val = val.filter(|v| !v.is_empty());
    check_samples(model, train, "training")?;
    if let Some(v) = val {
        check_samples(model, v, "validation")?;
    }
    let w = match cfg.class_weights {
        Some(w) => w,
        None => class_weights(&train.iter().map(|s| s.label).collect::<Vec<_>>())?,
    };
    let eps = cfg.label_smoothing;
    let targets: Vec<_> = train.iter().map(|s| smoothed_target(s.label, eps)).collect::<Result<_>>()?;
    let val_targets: Vec<_> = val
        .unwrap_or(&[])
        .iter()
        .map(|s| smoothed_target(s.label, eps))
        .collect::<Result<_>>()?;

    let mut params = init;
    let mut opt = AdamW::new(AdamWConfig::new(cfg.learning_rate, cfg.weight_decay), params.data().len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.max_epochs);
    let mut best: Option<(f64, usize, Params)> = None;

    for epoch in 1..=cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut stream_rng(cfg.seed, STREAM_SHUFFLE, epoch as u64, 0));
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(model, &params, train, &targets, batch, &w, cfg.seed, opt.steps(), exec)?;
            loss_sum += loss;
            opt.step(&mut params, &grads)?;
        }
        if !params.is_finite() {
            return Err(Error::domain(format!("parameters diverged in epoch {epoch}")));
        }
        let train_loss = loss_sum / train.len() as f64;
        let mut record = EpochRecord {
            epoch,
            train_loss,
            val_loss: None,
            val_acc: None,
            val_macro_f1: None,
        };
        if let Some(v) = val {
            let s = validate_epoch(model, &params, v, &val_targets, &w, exec)?;
            record.val_loss = Some(s.loss);
            record.val_acc = Some(s.acc);
            record.val_macro_f1 = Some(s.macro_f1);
            let score = match cfg.selection {
                Selection::ValMacroF1 => s.macro_f1,
                Selection::ValAccuracy => s.acc,
                Selection::ValLoss => -s.loss,
                Selection::FinalEpoch => epoch as f64,
            };
            if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                best = Some((score, epoch, params.clone()));
            }
        }
        log::debug!(
            "epoch {epoch}: train_loss {train_loss:.6} val_acc {:?} val_macro_f1 {:?}",
            record.val_acc,
            record.val_macro_f1
        );
        epochs.push(record);
    }
    let (selected_epoch, params) = match best {
        Some((_, e, p)) => (e, p),
        None => (cfg.max_epochs, params),
    };
    Ok(Trained {
        params,
        history: TrainHistory { epochs, selected_epoch },
        class_weights: w,
    })
}

/// [`train_from`] with parameters initialized from `cfg.seed`.
pub fn train<M: Classifier>(
    model: &M,
    train: &[LabeledWindow],
    val: Option<&[LabeledWindow]>,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<Trained> {
    train_from(model, model.init_seeded(cfg.seed), train, val, cfg, exec)
}

/// Trains the configured architecture and packages the result with the
/// scaler and feature order needed to score raw windows later.
pub fn train_checkpoint(
    arch: &Architecture,
    features: FeatureOrder,
    scaler: Option<Scaler>,
    train_set: &[LabeledWindow],
    val: Option<&[LabeledWindow]>,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<(Checkpoint, Trained)> {
    let trained = match arch {
        Architecture::MineRoi(c) => train(&MineRoiNet::new(c.clone())?, train_set, val, cfg, exec)?,
        Architecture::Lstm(c) => train(&LstmNet::new(c.clone())?, train_set, val, cfg, exec)?,
    };
    let mut ck = Checkpoint::new(arch.clone(), trained.params.clone())?;
    ck.features = features;
    ck.scaler = scaler;
    ck.epoch = Some(trained.history.selected_epoch);
    ck.seed = Some(cfg.seed);
    Ok((ck, trained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;
    use crate::roi::RoiClass;
    use ndarray::Array2;
    use rand::Rng;

    fn toy(n: usize, seed: u64) -> Vec<LabeledWindow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let c = i % 3;
                let x = Array2::from_shape_simple_fn((8, 3), || 0.3 * c as f64 + rng.random_range(-0.05..0.05));
                LabeledWindow {
                    x,
                    label: RoiClass::from_index(c).unwrap(),
                }
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 16,
            max_epochs: 3,
            learning_rate: 1e-2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn same_seed_same_history_in_both_modes() {
        let net = MineRoiNet::new(ModelConfig { dropout: 0.1, ..ModelConfig::tiny() }).unwrap();
        let (tr, va) = (toy(48, 1), toy(12, 2));
        let a = train(&net, &tr, Some(&va), &cfg(), Exec::Sequential).unwrap();
        let b = train(&net, &tr, Some(&va), &cfg(), Exec::Parallel).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
        let c = train(&net, &tr, Some(&va), &TrainConfig { seed: 7, ..cfg() }, Exec::Sequential).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn final_epoch_without_validation() {
        let net = MineRoiNet::new(ModelConfig::tiny()).unwrap();
        let t = train(&net, &toy(30, 3), None, &cfg(), Exec::default()).unwrap();
        assert_eq!(t.history.selected_epoch, 3);
        assert_eq!(t.history.epochs.len(), 3);
        assert!(t.history.epochs.iter().all(|e| e.val_acc.is_none()));
        let csv = t.history.to_csv();
        assert!(csv.starts_with("epoch,train_loss,val_loss,val_acc,val_macro_f1\n1,"));
        assert!(csv.lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn rejects_empty_and_bad_config() {
        let net = MineRoiNet::new(ModelConfig::tiny()).unwrap();
        assert!(matches!(train(&net, &[], None, &cfg(), Exec::Sequential), Err(Error::Empty(_))));
        let bad = TrainConfig {
            batch_size: 0,
            label_smoothing: 1.0,
            class_weights: Some([1.0, 0.0, 1.0]),
            ..cfg()
        };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("batch_size") && msg.contains("label_smoothing") && msg.contains("class weights"));
    }
}
