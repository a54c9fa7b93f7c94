//! Confusion matrices, per-class rates, one-vs-rest AUC and seed aggregation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nn::NUM_CLASSES;
use crate::roi::RoiClass;

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape(format!(
                "{} true labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut cm = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(Error::domain(format!("label pair ({t}, {p}) outside {{0, 1, 2}}")));
            }
            cm.counts[t][p] += 1;
        }
        Ok(cm)
    }

    pub fn from_classes(truth: &[RoiClass], predicted: &[RoiClass]) -> Result<Self> {
        let t: Vec<usize> = truth.iter().map(|c| c.index()).collect();
        let p: Vec<usize> = predicted.iter().map(|c| c.index()).collect();
        Self::from_labels(&t, &p)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }
}

/// A ratio whose denominator was zero; reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Degenerate {
    pub precision: [bool; NUM_CLASSES],
    pub recall: [bool; NUM_CLASSES],
    pub f1: [bool; NUM_CLASSES],
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision.iter().chain(&self.recall).chain(&self.f1).any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

fn mean3(v: &[f64; NUM_CLASSES]) -> f64 {
    v.iter().sum::<f64>() / NUM_CLASSES as f64
}

pub fn metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix has no samples".into()));
    }
    let mut m = Metrics {
        accuracy: cm.trace() as f64 / total as f64,
        precision: [0.0; NUM_CLASSES],
        recall: [0.0; NUM_CLASSES],
        f1: [0.0; NUM_CLASSES],
        macro_precision: 0.0,
        macro_recall: 0.0,
        macro_f1: 0.0,
        degenerate: Degenerate::default(),
    };
    for c in 0..NUM_CLASSES {
        let tp = cm.counts[c][c] as f64;
        (m.precision[c], m.degenerate.precision[c]) = ratio(tp, cm.col_sum(c) as f64);
        (m.recall[c], m.degenerate.recall[c]) = ratio(tp, cm.row_sum(c) as f64);
        let (p, r) = (m.precision[c], m.recall[c]);
        (m.f1[c], m.degenerate.f1[c]) = ratio(2.0 * p * r, p + r);
    }
    m.macro_precision = mean3(&m.precision);
    m.macro_recall = mean3(&m.recall);
    m.macro_f1 = mean3(&m.f1);
    Ok(m)
}

/// Index of the largest probability; ties go to the lower class.
pub fn argmax(p: &[f64; NUM_CLASSES]) -> usize {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if p[c] > p[best] {
            best = c;
        }
    }
    best
}

/// Rank-based binary AUC (Mann–Whitney U with average ranks for ties).
pub fn auc_binary(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("non-finite score"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::domain("AUC needs both positive and negative samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are 1-based; ties share the mean of their positions. Doubled to stay integral.
    let mut rank_sum2 = 0u64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let doubled = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum2 += doubled;
            }
        }
        i = j + 1;
    }
    let np = n_pos as u64;
    let u2 = rank_sum2 - np * (np + 1);
    Ok(u2 as f64 / 2.0 / (np * n_neg as u64) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Auc {
    /// `None` when the class is absent from, or the only class in, the labels.
    pub per_class: [Option<f64>; NUM_CLASSES],
    /// Mean over the classes with a defined AUC.
    pub macro_auc: Option<f64>,
}

/// One-vs-rest AUC per class from probability rows.
pub fn auc_ovr(scores: &[[f64; NUM_CLASSES]], labels: &[usize]) -> Result<Auc> {
    if scores.len() != labels.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    for (i, row) in scores.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("probability row {i} sums to {s}")));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= NUM_CLASSES) {
        return Err(Error::domain(format!("label {bad} outside {{0, 1, 2}}")));
    }
    let mut per_class = [None; NUM_CLASSES];
    for (c, slot) in per_class.iter_mut().enumerate() {
        let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        *slot = auc_binary(&s, &pos).ok();
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(Auc { per_class, macro_auc })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub split: String,
    pub seed: u64,
    pub metrics: Metrics,
    pub auc: Auc,
    pub confusion: ConfusionMatrix,
}

/// Scores `probabilities` against `truth`.
pub fn evaluate(split: &str, seed: u64, probabilities: &[[f64; NUM_CLASSES]], truth: &[usize]) -> Result<EvalReport> {
    let predicted: Vec<usize> = probabilities.iter().map(argmax).collect();
    let confusion = ConfusionMatrix::from_labels(truth, &predicted)?;
    Ok(EvalReport {
        split: split.to_string(),
        seed,
        metrics: metrics(&confusion)?,
        auc: auc_ovr(probabilities, truth)?,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Empty(format!("aggregation needs at least 2 values, got {}", values.len())));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub precision: [MeanStd; NUM_CLASSES],
    pub recall: [MeanStd; NUM_CLASSES],
    pub f1: [MeanStd; NUM_CLASSES],
    /// Present only when every report defines that class's AUC.
    pub auc: [Option<MeanStd>; NUM_CLASSES],
    pub macro_auc: Option<MeanStd>,
}

/// Mean and sample standard deviation of every metric across runs.
pub fn aggregate_seeds(reports: &[EvalReport]) -> Result<Aggregate> {
    if reports.len() < 2 {
        return Err(Error::Empty(format!("aggregation needs at least 2 reports, got {}", reports.len())));
    }
    let of = |f: &dyn Fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let opt = |f: &dyn Fn(&EvalReport) -> Option<f64>| -> Result<Option<MeanStd>> {
        let v: Option<Vec<f64>> = reports.iter().map(f).collect();
        v.map(|v| MeanStd::of(&v)).transpose()
    };
    let per = |f: &dyn Fn(&Metrics, usize) -> f64| -> Result<[MeanStd; NUM_CLASSES]> {
        Ok([of(&|r| f(&r.metrics, 0))?, of(&|r| f(&r.metrics, 1))?, of(&|r| f(&r.metrics, 2))?])
    };
    Ok(Aggregate {
        runs: reports.len(),
        accuracy: of(&|r| r.metrics.accuracy)?,
        macro_precision: of(&|r| r.metrics.macro_precision)?,
        macro_recall: of(&|r| r.metrics.macro_recall)?,
        macro_f1: of(&|r| r.metrics.macro_f1)?,
        precision: per(&|m, c| m.precision[c])?,
        recall: per(&|m, c| m.recall[c])?,
        f1: per(&|m, c| m.f1[c])?,
        auc: [
            opt(&|r| r.auc.per_class[0])?,
            opt(&|r| r.auc.per_class[1])?,
            opt(&|r| r.auc.per_class[2])?,
        ],
        macro_auc: opt(&|r| r.auc.macro_auc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_perfect() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 2, 2], &[0, 1, 2, 2]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.macro_f1, 1.0);
        assert!(!m.degenerate.any());
    }

    #[test]
    fn single_predicted_column() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 2, 0], &[1, 1, 1, 1]).unwrap();
        for r in cm.counts {
            assert_eq!(r[0] + r[2], 0);
        }
        let m = metrics(&cm).unwrap();
        assert!(m.degenerate.precision[0] && m.degenerate.precision[2]);
        assert_eq!(m.precision[0], 0.0);
        assert!((m.precision[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_flagged() {
        let cm = ConfusionMatrix::from_labels(&[0, 1, 1], &[0, 1, 0]).unwrap();
        let m = metrics(&cm).unwrap();
        assert_eq!((m.precision[2], m.recall[2], m.f1[2]), (0.0, 0.0, 0.0));
        assert!(m.degenerate.precision[2] && m.degenerate.recall[2] && m.degenerate.f1[2]);
    }

    #[test]
    fn hand_computed_fixture() {
        // true counts (10, 10, 10), diagonal (8, 9, 7)
        let counts = [[8, 1, 1], [0, 9, 1], [2, 1, 7]];
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (t, row) in counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                for _ in 0..n {
                    truth.push(t);
                    pred.push(p);
                }
            }
        }
        let m = metrics(&ConfusionMatrix::from_labels(&truth, &pred).unwrap()).unwrap();
        assert_eq!(m.accuracy, 24.0 / 30.0);
        assert_eq!(m.precision, [8.0 / 10.0, 9.0 / 11.0, 7.0 / 9.0]);
        assert_eq!(m.recall, [8.0 / 10.0, 9.0 / 10.0, 7.0 / 10.0]);
        let f1_1 = 2.0 * (9.0 / 11.0) * 0.9 / (9.0 / 11.0 + 0.9);
        assert!((m.f1[1] - f1_1).abs() < 1e-15);
        // f1 of class 1 = 18/21
        assert!((m.f1[1] - 18.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn bad_labels_and_empty() {
        assert!(ConfusionMatrix::from_labels(&[3], &[0]).is_err());
        assert!(ConfusionMatrix::from_labels(&[0, 1], &[0]).is_err());
        assert!(metrics(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc_binary(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc_binary(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(auc_binary(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert!(auc_binary(&[0.1, 0.2], &[true, true]).is_err());
        let a = auc_ovr(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &[0, 1]).unwrap();
        assert_eq!(a.per_class, [Some(1.0), Some(1.0), None]);
        assert_eq!(a.macro_auc, Some(1.0));
        assert!(auc_ovr(&[[0.5, 0.0, 0.0]], &[0]).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let r = |acc: f64| {
            let mut e = evaluate("s", 0, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], &[0, 1, 2]).unwrap();
            e.metrics.accuracy = acc;
            e
        };
        let a = aggregate_seeds(&[r(0.8), r(0.9)]).unwrap();
        assert!((a.accuracy.mean - 0.85).abs() < 1e-15);
        assert!((a.accuracy.std - 0.07071067811865474).abs() < 1e-12);
        assert_eq!(a.macro_f1.std, 0.0);
        assert!(aggregate_seeds(&[r(0.5)]).is_err());
    }
}
