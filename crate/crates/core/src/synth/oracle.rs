//! Deliberately naive reference implementations used as test oracles.
//!
//! Nothing here calls into the optimized code paths it is compared with.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::nn::SpectralMode;
use crate::roi::{MachineSpec, Market, RoiClass, RoiResult};

/// Day-by-day ROI loop over the market's raw day list.
pub fn oracle_roi(machine: &MachineSpec, date: NaiveDate, horizon: u32, market: &Market, region: &str) -> Result<RoiResult> {
    let days = market.days();
    let mut start = None;
    for (i, d) in days.iter().enumerate() {
        if d.date == date {
            start = Some(i);
        }
    }
    let start = start.ok_or_else(|| Error::Coverage {
        what: "market day".into(),
        date,
    })?;
    let capital = *machine.prices.get(&date).ok_or_else(|| Error::Coverage {
        what: format!("price of machine {}", machine.id),
        date,
    })?;
    let mut revenue = 0.0;
    let mut cost = 0.0;
    for k in 0..horizon as usize {
        let Some(day) = days.get(start + k) else {
            return Err(Error::Coverage {
                what: "market day".into(),
                date,
            });
        };
        let share = machine.hashrate_ths * day.network_revenue / day.network_hashrate;
        let rate = *day.electricity_rates.get(region).ok_or_else(|| Error::Coverage {
            what: format!("electricity rate for region {region}"),
            date: day.date,
        })?;
        let kwh = machine.power_w * 24.0 / 1000.0;
        revenue += share;
        cost += kwh * rate;
    }
    let roi = (revenue - cost) / capital;
    let label = if roi <= 0.0 {
        RoiClass::Unprofitable
    } else if roi >= 1.0 {
        RoiClass::Profitable
    } else {
        RoiClass::Marginal
    };
    Ok(RoiResult {
        roi,
        revenue_total: revenue,
        op_cost_total: cost,
        capital,
        label,
    })
}

/// `X_k = Σ_n x_n e^{−2πi kn/L}`, as (re, im).
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let l = x.len();
    (0..l)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * n % l) as f64 / l as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            (re, im)
        })
        .collect()
}

/// `x_n = (1/L) Σ_k X_k e^{2πi kn/L}`, as (re, im).
pub fn naive_idft(spectrum: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let l = spectrum.len();
    (0..l)
        .map(|n| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, &(a, b)) in spectrum.iter().enumerate() {
                let t = 2.0 * std::f64::consts::PI * (k * n % l) as f64 / l as f64;
                let (c, s) = (t.cos(), t.sin());
                re += a * c - b * s;
                im += a * s + b * c;
            }
            (re / l as f64, im / l as f64)
        })
        .collect()
}

/// Spectral filter of one feature series through the O(L²) transforms.
/// `re`/`im` hold one weight (literal) or `L/2 + 1` weights (per bin).
pub fn naive_spectral(x: &[f64], re: &[f64], im: &[f64], mode: SpectralMode) -> Vec<f64> {
    let l = x.len();
    let spec = naive_dft(x);
    let filtered: Vec<(f64, f64)> = spec
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let (wr, wi) = match mode {
                SpectralMode::Literal => (re[0], im[0]),
                SpectralMode::PerBin if k <= l / 2 => (re[k], im[k]),
                SpectralMode::PerBin => (re[l - k], -im[l - k]),
            };
            (wr * a - wi * b, wr * b + wi * a)
        })
        .collect();
    naive_idft(&filtered).into_iter().map(|(r, _)| r).collect()
}

/// 3×3 counts by a double loop over classes.
#[allow(clippy::needless_range_loop)]
pub fn naive_confusion(truth: &[usize], pred: &[usize]) -> [[u64; 3]; 3] {
    let mut cm = [[0u64; 3]; 3];
    for t in 0..3 {
        for p in 0..3 {
            cm[t][p] = truth.iter().zip(pred).filter(|(a, b)| **a == t && **b == p).count() as u64;
        }
    }
    cm
}

/// (accuracy, precision, recall, f1) by direct counting; 0/0 → 0.
pub fn naive_rates(truth: &[usize], pred: &[usize]) -> (f64, [f64; 3], [f64; 3], [f64; 3]) {
    let n = truth.len();
    let correct = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    let (mut p, mut r, mut f) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    for c in 0..3 {
        let tp = truth.iter().zip(pred).filter(|(a, b)| **a == c && **b == c).count();
        let predicted = pred.iter().filter(|b| **b == c).count();
        let actual = truth.iter().filter(|a| **a == c).count();
        p[c] = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        r[c] = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
        f[c] = if p[c] + r[c] == 0.0 { 0.0 } else { 2.0 * p[c] * r[c] / (p[c] + r[c]) };
    }
    (correct as f64 / n as f64, p, r, f)
}

/// Fraction of (positive, negative) pairs ranked correctly; ties count 1/2.
pub fn naive_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut twice_wins = 0u64;
    let mut pairs = 0u64;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if positive[i] && !positive[j] {
                pairs += 1;
                if scores[i] > scores[j] {
                    twice_wins += 2;
                } else if scores[i] == scores[j] {
                    twice_wins += 1;
                }
            }
        }
    }
    twice_wins as f64 / 2.0 / pairs as f64
}

/// Mean and (n − 1) standard deviation written out term by term.
pub fn naive_mean_std(v: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    for x in v {
        sum += x;
    }
    let mean = sum / v.len() as f64;
    let mut ss = 0.0;
    for x in v {
        ss += (x - mean).powi(2);
    }
    (mean, (ss / (v.len() - 1) as f64).sqrt())
}
