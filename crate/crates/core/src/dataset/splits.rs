//! Expanding-window split plans, split preparation and class weights.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Mutex;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::scaler::Scaler;
use super::windows::WindowSample;
use crate::error::{Error, Result};
use crate::roi::RoiClass;

/// Half-open date interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[NaiveDate; 2]", into = "[NaiveDate; 2]")]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end <= start {
            return Err(Error::Plan(format!("empty date range [{start}, {end})")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d < self.end
    }

    pub fn overlaps(&self, other: &DateRange) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn covers(&self, other: &DateRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl TryFrom<[NaiveDate; 2]> for DateRange {
    type Error = Error;

    fn try_from(v: [NaiveDate; 2]) -> Result<Self> {
        DateRange::new(v[0], v[1])
    }
}

impl From<DateRange> for [NaiveDate; 2] {
    fn from(r: DateRange) -> Self {
        [r.start, r.end]
    }
}

impl fmt::Display for DateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// A training range and the range evaluated after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedSplit {
    pub name: String,
    pub train: DateRange,
    pub eval: DateRange,
}

/// Cross-validation splits plus the final train/test split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    #[serde(default)]
    pub splits: Vec<NamedSplit>,
    #[serde(rename = "final")]
    pub final_split: NamedSplit,
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).expect("valid date")
}

impl Default for SplitPlan {
    /// Final training October 2015 – June 2023, final test June 2023 –
    /// September 2024 inclusive. No cross-validation splits.
    fn default() -> Self {
        SplitPlan {
            splits: Vec::new(),
            final_split: NamedSplit {
                name: "final".into(),
                train: DateRange {
                    start: d(2015, 10, 1),
                    end: d(2023, 6, 1),
                },
                eval: DateRange {
                    start: d(2023, 6, 1),
                    end: d(2024, 10, 1),
                },
            },
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        let all = self.splits.iter().chain(std::iter::once(&self.final_split));
        for s in all {
            if s.eval.start < s.train.end {
                return Err(Error::Plan(format!(
                    "{}: evaluation range {} must start at or after training range {} ends",
                    s.name, s.eval, s.train
                )));
            }
        }
        for pair in self.splits.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if !b.train.covers(&a.train) {
                return Err(Error::Plan(format!(
                    "training ranges must expand: {} {} is not within {} {}",
                    a.name, a.train, b.name, b.train
                )));
            }
        }
        for (i, a) in self.splits.iter().enumerate() {
            for b in &self.splits[i + 1..] {
                if a.eval.overlaps(&b.eval) {
                    return Err(Error::Plan(format!("{} and {} have overlapping evaluation ranges", a.name, b.name)));
                }
            }
        }
        let test = &self.final_split.eval;
        for s in &self.splits {
            if s.train.end > test.start || s.eval.end > test.start {
                return Err(Error::Plan(format!(
                    "{} reaches into the final test range {test}",
                    s.name
                )));
            }
            if !self.final_split.train.covers(&s.train) {
                return Err(Error::Plan(format!(
                    "{} training range {} is not within the final training range",
                    s.name, s.train
                )));
            }
        }
        let mut names: Vec<&str> = self.splits.iter().map(|s| s.name.as_str()).collect();
        names.push(&self.final_split.name);
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Plan("split names must be unique".into()));
        }
        Ok(())
    }
}

/// Inverse-frequency class weights `N / (3 · n_c)`.
pub fn class_weights(labels: &[RoiClass]) -> Result<[f64; 3]> {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    class_weights_from_counts(counts)
}

pub fn class_weights_from_counts(counts: [usize; 3]) -> Result<[f64; 3]> {
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Empty(format!(
            "class {c} has no samples; audit the labels or the split ranges"
        )));
    }
    let n: usize = counts.iter().sum();
    Ok(counts.map(|nc| n as f64 / (3.0 * nc as f64)))
}

/// A normalized input matrix with its class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub x: Array2<f64>,
    pub label: RoiClass,
}

impl LabeledWindow {
    /// Wraps an already-scaled sample.
    pub fn unscaled(s: &WindowSample) -> Self {
        Self {
            x: s.matrix.clone(),
            label: s.label,
        }
    }
}

/// Window samples with accounting of which end dates were handed out.
#[derive(Debug)]
pub struct SampleStore {
    samples: Vec<WindowSample>,
    served: Mutex<BTreeMap<NaiveDate, usize>>,
}

impl SampleStore {
    pub fn new(mut samples: Vec<WindowSample>) -> Self {
        samples.sort_by(|a, b| (a.end_date, &a.machine_id).cmp(&(b.end_date, &b.machine_id)));
        Self {
            samples,
            served: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples whose end date falls in `range`, recorded as served.
    pub fn select(&self, range: DateRange) -> Vec<&WindowSample> {
        let picked: Vec<&WindowSample> = self.samples.iter().filter(|s| range.contains(s.end_date)).collect();
        let mut served = self.served.lock().expect("store lock");
        for s in &picked {
            *served.entry(s.end_date).or_default() += 1;
        }
        picked
    }

    /// How many served samples had an end date inside `range`.
    pub fn served_within(&self, range: DateRange) -> usize {
        let served = self.served.lock().expect("store lock");
        served.range(range.start..range.end).map(|(_, n)| *n).sum()
    }

    pub fn all(&self) -> &[WindowSample] {
        &self.samples
    }
}

/// Sample identity kept next to prepared windows for reporting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleKey {
    pub machine_id: String,
    pub end_date: NaiveDate,
}

/// Train and evaluation sets of one split, scaled with bounds fitted on the
/// training windows only.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub name: String,
    pub scaler: Scaler,
    pub class_weights: [f64; 3],
    pub train: Vec<LabeledWindow>,
    pub eval: Vec<LabeledWindow>,
    pub train_keys: Vec<SampleKey>,
    pub eval_keys: Vec<SampleKey>,
}

fn scaled(scaler: &Scaler, picked: &[&WindowSample]) -> Result<(Vec<LabeledWindow>, Vec<SampleKey>)> {
    let mut xs = Vec::with_capacity(picked.len());
    let mut keys = Vec::with_capacity(picked.len());
    for s in picked {
        xs.push(LabeledWindow {
            x: scaler.transform(s.matrix.view())?,
            label: s.label,
        });
        keys.push(SampleKey {
            machine_id: s.machine_id.clone(),
            end_date: s.end_date,
        });
    }
    Ok((xs, keys))
}

/// Assigns samples to `split` by end date, fits the scaler and class weights
/// on the training part, and scales both parts.
pub fn prepare_split(store: &SampleStore, split: &NamedSplit) -> Result<PreparedSplit> {
    let mut p = prepare_train(store, &split.name, split.train)?;
    let eval = store.select(split.eval);
    if eval.is_empty() {
        return Err(Error::Empty(format!("{}: no evaluation samples in {}", split.name, split.eval)));
    }
    (p.eval, p.eval_keys) = scaled(&p.scaler, &eval)?;
    Ok(p)
}

/// Training part only; the evaluation range is never read.
pub fn prepare_train(store: &SampleStore, name: &str, range: DateRange) -> Result<PreparedSplit> {
    let train = store.select(range);
    if train.is_empty() {
        return Err(Error::Empty(format!("{name}: no training samples in {range}")));
    }
    let scaler = Scaler::fit_matrices(train.iter().map(|s| s.matrix.view()))?;
    let labels: Vec<RoiClass> = train.iter().map(|s| s.label).collect();
    let class_weights = class_weights(&labels)?;
    let (train_x, train_keys) = scaled(&scaler, &train)?;
    Ok(PreparedSplit {
        name: name.to_string(),
        scaler,
        class_weights,
        train: train_x,
        eval: Vec::new(),
        train_keys,
        eval_keys: Vec::new(),
    })
}

/// Prepares every cross-validation split of `plan`. The final split is never touched.
pub fn build_splits(store: &SampleStore, plan: &SplitPlan) -> Result<Vec<PreparedSplit>> {
    plan.validate()?;
    plan.splits.iter().map(|s| prepare_split(store, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dt(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn range(a: &str, b: &str) -> DateRange {
        DateRange::new(dt(a), dt(b)).unwrap()
    }

    fn split(name: &str, t: (&str, &str), e: (&str, &str)) -> NamedSplit {
        NamedSplit {
            name: name.into(),
            train: range(t.0, t.1),
            eval: range(e.0, e.1),
        }
    }

    fn plan() -> SplitPlan {
        SplitPlan {
            splits: vec![
                split("s1", ("2020-01-01", "2020-04-01"), ("2020-04-01", "2020-05-01")),
                split("s2", ("2020-01-01", "2020-05-01"), ("2020-05-01", "2020-06-01")),
                split("s3", ("2020-01-01", "2020-06-01"), ("2020-06-01", "2020-07-01")),
            ],
            final_split: split("final", ("2020-01-01", "2020-07-01"), ("2020-07-01", "2020-09-01")),
        }
    }

    #[test]
    fn class_weight_examples() {
        assert_eq!(class_weights_from_counts([10, 10, 10]).unwrap(), [1.0, 1.0, 1.0]);
        let w = class_weights_from_counts([1, 1, 2]).unwrap();
        assert!((w[0] - 4.0 / 3.0).abs() < 1e-15 && (w[2] - 2.0 / 3.0).abs() < 1e-15);
        // test-set fractions 39.7 / 27.6 / 32.7 percent
        let w = class_weights_from_counts([397, 276, 327]).unwrap();
        let want = [0.8396305625524769, 1.2077294685990339, 1.0193679918450562];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(class_weights_from_counts([3, 0, 1]), Err(Error::Empty(_))));
    }

    #[test]
    fn valid_plan_and_guards() {
        plan().validate().unwrap();
        SplitPlan::default().validate().unwrap();

        let mut p = plan();
        p.splits[0].eval = range("2020-03-15", "2020-05-01");
        assert!(p.validate().is_err(), "eval overlapping its own training range");

        let mut p = plan();
        p.splits[1].train = range("2020-02-01", "2020-05-01");
        assert!(p.validate().is_err(), "shrinking training range");

        let mut p = plan();
        p.splits[2].eval = range("2020-06-01", "2020-08-01");
        assert!(p.validate().is_err(), "validation reaching into test");

        let mut p = plan();
        p.splits[1].eval = range("2020-04-15", "2020-06-01");
        assert!(p.validate().is_err(), "overlapping evaluation ranges");
    }

    #[test]
    fn default_plan_ranges_do_not_overlap() {
        let p = SplitPlan::default();
        assert!(!p.final_split.train.overlaps(&p.final_split.eval));
        assert_eq!(p.final_split.train.end, p.final_split.eval.start);
        assert!(p.final_split.eval.contains(dt("2024-09-30")));
        assert!(!p.final_split.eval.contains(dt("2024-10-01")));
    }

    #[test]
    fn half_open_boundaries() {
        let r = range("2020-04-01", "2020-05-01");
        assert!(r.contains(dt("2020-04-01")));
        assert!(!r.contains(dt("2020-05-01")));
        assert!(DateRange::new(dt("2020-01-02"), dt("2020-01-01")).is_err());
    }
}
