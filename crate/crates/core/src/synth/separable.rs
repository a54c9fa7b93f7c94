//! Windows with planted, linearly separable class structure.

use chrono::{Days, NaiveDate};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::default_halvings;
use crate::dataset::{
    Dataset, DatasetMeta, DateRange, FeatureOrder, LabeledWindow, MachineRows, NamedSplit, SplitPlan, WindowSample,
    NUM_FEATURES,
};
use crate::error::Result;
use crate::roi::{RoiClass, HORIZON_DAYS};

pub const NOISE_STD: f64 = 0.1;

/// Class mean: features with `j % 3 == c` sit at 0.75, the rest at 0.25.
/// The means do not depend on the seed, so separate draws share them.
pub fn class_mean(class: usize, window: usize, features: usize) -> Array2<f64> {
    Array2::from_shape_fn((window, features), |(_, j)| if j % 3 == class { 0.75 } else { 0.25 })
}

/// `n_per_class` windows of each class in class-interleaved order, with
/// i.i.d. Gaussian noise of standard deviation [`NOISE_STD`].
pub fn separable_dataset(window: usize, features: usize, n_per_class: usize, seed: u64) -> Vec<LabeledWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).expect("valid normal");
    let means: Vec<Array2<f64>> = (0..3).map(|c| class_mean(c, window, features)).collect();
    let mut out = Vec::with_capacity(3 * n_per_class);
    for _ in 0..n_per_class {
        for (c, mean) in means.iter().enumerate() {
            let x = mean.mapv(|m| m + noise.sample(&mut rng));
            out.push(LabeledWindow {
                x,
                label: RoiClass::from_index(c).expect("class index"),
            });
        }
    }
    out
}

/// Accuracy of the nearest-class-mean rule fitted on `train` and scored on `test`.
pub fn nearest_mean_accuracy(train: &[LabeledWindow], test: &[LabeledWindow]) -> f64 {
    let shape = train[0].x.raw_dim();
    let mut sums = vec![Array2::<f64>::zeros(shape); 3];
    let mut counts = [0usize; 3];
    for s in train {
        sums[s.label.index()] += &s.x;
        counts[s.label.index()] += 1;
    }
    let means: Vec<Array2<f64>> = sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| s / n.max(1) as f64)
        .collect();
    let correct = test
        .iter()
        .filter(|s| {
            let d: Vec<f64> = means.iter().map(|m| (&s.x - m).mapv(|v| v * v).sum()).collect();
            let best = (0..3).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
            best == s.label.index()
        })
        .count();
    correct as f64 / test.len() as f64
}

/// [`separable_dataset`] packaged as a dataset directory so `train` and `cv`
/// run on it unchanged. Each sample is its own pseudo-machine holding exactly
/// one window; end dates are consecutive days in sample order. The plan
/// evaluates one split on the middle 30% and keeps the last 20% as the test range.
pub fn separable_bundle(window: usize, n_per_class: usize, seed: u64) -> Result<Dataset> {
    let data = separable_dataset(window, NUM_FEATURES, n_per_class, seed);
    let first = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let end_of = |i: usize| first + Days::new((window - 1 + i) as u64);
    let mut rows = Vec::with_capacity(data.len());
    let mut samples = Vec::with_capacity(data.len());
    for (i, s) in data.iter().enumerate() {
        let id = format!("sep-{i:05}");
        let values = s
            .x
            .outer_iter()
            .map(|r| std::array::from_fn(|j| r[j]))
            .collect::<Vec<[f64; NUM_FEATURES]>>();
        rows.push(MachineRows {
            machine_id: id.clone(),
            start: first + Days::new(i as u64),
            values,
        });
        samples.push(WindowSample {
            machine_id: id,
            end_date: end_of(i),
            matrix: s.x.clone(),
            label: s.label,
            roi: s.label.index() as f64 - 0.5,
        });
    }
    let n = data.len();
    let cut = |f: f64| end_of((n as f64 * f) as usize);
    let range = |a, b| DateRange::new(a, b);
    let plan = SplitPlan {
        splits: vec![NamedSplit {
            name: "split1".into(),
            train: range(end_of(0), cut(0.5))?,
            eval: range(cut(0.5), cut(0.8))?,
        }],
        final_split: NamedSplit {
            name: "final".into(),
            train: range(end_of(0), cut(0.8))?,
            eval: range(cut(0.8), end_of(n))?,
        },
    };
    plan.validate()?;
    Ok(Dataset {
        meta: DatasetMeta {
            window,
            horizon: HORIZON_DAYS,
            region: "synthetic".into(),
            halving_dates: default_halvings(),
            features: FeatureOrder::default(),
            plan,
        },
        rows,
        samples,
    })
}
