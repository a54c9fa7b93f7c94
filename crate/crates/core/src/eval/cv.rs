//! Expanding-window cross-validation over a split plan.

use serde::{Deserialize, Serialize};

use super::metrics::{aggregate_seeds, evaluate, Aggregate, EvalReport};
use super::report::{aggregate_table, cv_table, single_table};
use crate::dataset::{
    build_splits, prepare_split, prepare_train, FeatureOrder, LabeledWindow, PreparedSplit, SampleStore, SplitPlan,
};
use crate::error::{Error, Result};
use crate::nn::checkpoint::{Architecture, Checkpoint};
use crate::nn::{LstmNet, MineRoiNet, Params, NUM_CLASSES};
use crate::par::Exec;
use crate::train::{predict, train_checkpoint, TrainConfig, TrainHistory, Trained};

fn d_val() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub model: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    /// Chronological tail of each split's training samples held out for
    /// epoch selection; 0 trains on everything and keeps the final epoch.
    #[serde(default = "d_val")]
    pub validation_fraction: f64,
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.model.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.train.validate() {
            problems.push(e.to_string());
        }
        if self.seeds.is_empty() {
            problems.push("at least one seed is required".to_string());
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            problems.push(format!(
                "validation_fraction must be in [0, 0.5), got {}",
                self.validation_fraction
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct CvRun {
    pub split: String,
    pub seed: u64,
    pub history: TrainHistory,
    pub params: Params,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    /// Ordered by split, then seed.
    pub runs: Vec<CvRun>,
    pub table: String,
}

impl CvResult {
    pub fn reports(&self) -> Vec<EvalReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }
}

/// Splits training windows (in chronological order) into fit and selection
/// parts. The cut never separates samples that share an end date.
pub fn holdout_tail(
    split: &PreparedSplit,
    fraction: f64,
) -> (&[LabeledWindow], Option<&[LabeledWindow]>) {
    let n = split.train.len();
    let hold = (n as f64 * fraction).round() as usize;
    if hold == 0 || hold >= n {
        return (&split.train, None);
    }
    let mut cut = n - hold;
    while cut < n && split.train_keys[cut].end_date == split.train_keys[cut - 1].end_date {
        cut += 1;
    }
    if cut >= n {
        return (&split.train, None);
    }
    (&split.train[..cut], Some(&split.train[cut..]))
}

/// Training settings for one seed on one split; the LSTM takes its learning
/// rate from its own config.
fn seed_config(cfg: &CvConfig, split: &PreparedSplit, seed: u64) -> TrainConfig {
    let learning_rate = match &cfg.model {
        Architecture::Lstm(c) => c.learning_rate,
        Architecture::MineRoi(_) => cfg.train.learning_rate,
    };
    TrainConfig {
        seed,
        learning_rate,
        class_weights: Some(split.class_weights),
        ..cfg.train.clone()
    }
}

/// Trains one seed on the split's training part (epoch selection on its tail)
/// and bundles the split's scaler into the checkpoint.
fn fit_seed(
    cfg: &CvConfig,
    split: &PreparedSplit,
    features: &FeatureOrder,
    seed: u64,
    exec: Exec,
) -> Result<(Checkpoint, Trained)> {
    let (fit, val) = holdout_tail(split, cfg.validation_fraction);
    train_checkpoint(
        &cfg.model,
        features.clone(),
        Some(split.scaler.clone()),
        fit,
        val,
        &seed_config(cfg, split, seed),
        exec,
    )
}

/// Probabilities for already-scaled windows.
pub fn score(arch: &Architecture, params: &Params, samples: &[LabeledWindow], exec: Exec) -> Result<Vec<[f64; NUM_CLASSES]>> {
    match arch {
        Architecture::MineRoi(c) => predict(&MineRoiNet::new(c.clone())?, params, samples, exec),
        Architecture::Lstm(c) => predict(&LstmNet::new(c.clone())?, params, samples, exec),
    }
}

fn eval_seed(
    cfg: &CvConfig,
    split: &PreparedSplit,
    features: &FeatureOrder,
    seed: u64,
    exec: Exec,
) -> Result<(Checkpoint, Trained, EvalReport)> {
    let (ck, trained) = fit_seed(cfg, split, features, seed, exec)?;
    let probs = score(&cfg.model, &trained.params, &split.eval, exec)?;
    let truth: Vec<usize> = split.eval.iter().map(|s| s.label.index()).collect();
    let report = evaluate(&split.name, seed, &probs, &truth)?;
    log::info!(
        "{} seed {seed}: accuracy {:.3} macro_f1 {:.3} (epoch {})",
        split.name,
        report.metrics.accuracy,
        report.metrics.macro_f1,
        trained.history.selected_epoch
    );
    Ok((ck, trained, report))
}

fn run_one(cfg: &CvConfig, split: &PreparedSplit, seed: u64, exec: Exec) -> Result<CvRun> {
    let (_, trained, report) = eval_seed(cfg, split, &FeatureOrder::default(), seed, exec)?;
    Ok(CvRun {
        split: split.name.clone(),
        seed,
        history: trained.history,
        params: trained.params,
        report,
    })
}

/// For each split and seed: fit scaler and weights on the split's training
/// range, train, and score the split's evaluation range. Fails if any
/// sample from the final test range was handed out.
pub fn cross_validate(store: &SampleStore, plan: &SplitPlan, cfg: &CvConfig, exec: Exec) -> Result<CvResult> {
    cfg.validate()?;
    let prepared = build_splits(store, plan)?;
    let pairs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs = exec.try_map(&pairs, |&(i, seed)| run_one(cfg, &prepared[i], seed, exec))?;
    let touched = store.served_within(plan.final_split.eval);
    if touched > 0 {
        return Err(Error::Plan(format!(
            "cross-validation read {touched} samples from the final test range"
        )));
    }
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
    let table = cv_table(&title(cfg), &reports)?;
    Ok(CvResult { runs, table })
}

fn title(cfg: &CvConfig) -> String {
    format!("{} (L={})", cfg.model.kind().display_name(), cfg.model.window())
}

/// One seed of a final-split run.
#[derive(Debug, Clone)]
pub struct FinalRun {
    pub seed: u64,
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    /// Absent when only the training range was used.
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone)]
pub struct FinalResult {
    /// Ordered by seed as configured.
    pub runs: Vec<FinalRun>,
    /// Present with two or more evaluated seeds.
    pub aggregate: Option<Aggregate>,
    pub table: String,
}

/// Trains every seed on the final split's training range. The test range is not read.
pub fn train_final(
    store: &SampleStore,
    plan: &SplitPlan,
    features: &FeatureOrder,
    cfg: &CvConfig,
    exec: Exec,
) -> Result<Vec<FinalRun>> {
    cfg.validate()?;
    plan.validate()?;
    let f = &plan.final_split;
    let split = prepare_train(store, &f.name, f.train)?;
    exec.try_map(&cfg.seeds, |&seed| {
        let (checkpoint, trained) = fit_seed(cfg, &split, features, seed, exec)?;
        Ok(FinalRun {
            seed,
            checkpoint,
            history: trained.history,
            report: None,
        })
    })
}

/// Retrains every seed on the final training range and scores the final
/// test range once.
pub fn final_evaluation(
    store: &SampleStore,
    plan: &SplitPlan,
    features: &FeatureOrder,
    cfg: &CvConfig,
    exec: Exec,
) -> Result<FinalResult> {
    cfg.validate()?;
    plan.validate()?;
    let split = prepare_split(store, &plan.final_split)?;
    let runs = exec.try_map(&cfg.seeds, |&seed| {
        let (checkpoint, trained, report) = eval_seed(cfg, &split, features, seed, exec)?;
        Ok(FinalRun {
            seed,
            checkpoint,
            history: trained.history,
            report: Some(report),
        })
    })?;
    let reports: Vec<EvalReport> = runs.iter().filter_map(|r| r.report.clone()).collect();
    let (aggregate, table) = if reports.len() >= 2 {
        let agg = aggregate_seeds(&reports)?;
        let table = aggregate_table(&title(cfg), &agg);
        (Some(agg), table)
    } else {
        (None, single_table(&title(cfg), &reports[0]))
    };
    Ok(FinalResult { runs, aggregate, table })
}
