use chrono::{Days, NaiveDate};
use ndarray::Array2;

use super::features::{feature_row, FeatureOrder, NUM_FEATURES};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::roi::{self, MachineSpec, Market, RoiClass, RoiResult};

/// Contiguous daily feature rows of one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineRows {
    pub machine_id: String,
    pub start: NaiveDate,
    pub values: Vec<[f64; NUM_FEATURES]>,
}

impl MachineRows {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn date_of(&self, index: usize) -> NaiveDate {
        self.start + Days::new(index as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let off = (date - self.start).num_days();
        (off >= 0 && (off as usize) < self.values.len()).then_some(off as usize)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        (!self.values.is_empty()).then(|| self.date_of(self.values.len() - 1))
    }

    /// The `window` rows ending at `end`, oldest first.
    pub fn window(&self, end: NaiveDate, window: usize) -> Option<Array2<f64>> {
        let last = self.index_of(end)?;
        let first = (last + 1).checked_sub(window)?;
        let mut m = Array2::zeros((window, NUM_FEATURES));
        for (r, vals) in self.values[first..=last].iter().enumerate() {
            for (c, v) in vals.iter().enumerate() {
                m[[r, c]] = *v;
            }
        }
        Some(m)
    }

    /// Earliest end date for which a full window exists.
    pub fn earliest_window_end(&self, window: usize) -> Option<NaiveDate> {
        (window >= 1 && self.values.len() >= window).then(|| self.date_of(window - 1))
    }
}

/// An L×F feature matrix ending at `end_date` with its ROI label.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub machine_id: String,
    pub end_date: NaiveDate,
    /// Raw (unscaled) features, rows oldest → newest.
    pub matrix: Array2<f64>,
    pub label: RoiClass,
    pub roi: f64,
}

/// Settings that turn machines plus market data into labeled windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    pub region: String,
    pub window: usize,
    pub horizon: u32,
    pub halvings: Vec<NaiveDate>,
    pub order: FeatureOrder,
}

/// Feature rows for every day on which the machine is released, quoted, has
/// market data with a rate for the region, and follows at least one halving.
pub fn machine_rows(machine: &MachineSpec, market: &Market, cfg: &WindowConfig) -> Result<MachineRows> {
    let empty = MachineRows {
        machine_id: machine.id.clone(),
        start: machine.release_date,
        values: Vec::new(),
    };
    let (Some(first_quote), Some(last_quote)) = (machine.prices.keys().next(), machine.prices.keys().next_back())
    else {
        return Ok(empty);
    };
    let with_rate: Vec<NaiveDate> = market
        .days()
        .iter()
        .filter(|d| d.electricity_rates.contains_key(&cfg.region))
        .map(|d| d.date)
        .collect();
    let (Some(first_rate), Some(last_rate)) = (with_rate.first(), with_rate.last()) else {
        return Ok(empty);
    };
    let Some(first_halving) = cfg.halvings.iter().min() else {
        return Err(Error::config("halving calendar is empty"));
    };
    let start = *[machine.release_date, *first_quote, *first_rate, *first_halving]
        .iter()
        .max()
        .unwrap();
    let end = (*last_quote).min(*last_rate);
    if end < start {
        return Ok(MachineRows { start, ..empty });
    }
    let n = (end - start).num_days() as usize + 1;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let date = start + Days::new(k as u64);
        let day = market.day(date)?;
        values.push(feature_row(machine, day, &cfg.region, &cfg.halvings, &cfg.order)?.values);
    }
    Ok(MachineRows {
        machine_id: machine.id.clone(),
        start,
        values,
    })
}

/// One sample per end date `d` with `window` history rows ending at `d` and
/// `horizon` further rows after `d`. `label_of(d)` supplies the ROI result.
pub fn make_windows<F>(rows: &MachineRows, window: usize, horizon: u32, label_of: F) -> Result<Vec<WindowSample>>
where
    F: Fn(NaiveDate) -> Result<RoiResult>,
{
    let n = rows.len();
    let horizon = horizon as usize;
    if window == 0 || n < window + horizon {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(n + 1 - window - horizon);
    for last in (window - 1)..(n - horizon) {
        let end = rows.date_of(last);
        let r = label_of(end)?;
        out.push(WindowSample {
            machine_id: rows.machine_id.clone(),
            end_date: end,
            matrix: rows.window(end, window).expect("index in range"),
            label: r.label,
            roi: r.roi,
        });
    }
    Ok(out)
}

/// Feature rows and labeled windows for every machine.
pub fn build_samples(
    machines: &[MachineSpec],
    market: &Market,
    cfg: &WindowConfig,
    exec: Exec,
) -> Result<(Vec<MachineRows>, Vec<WindowSample>)> {
    let per_machine = exec.try_map(machines, |m| -> Result<_> {
        let rows = machine_rows(m, market, cfg)?;
        let samples = make_windows(&rows, cfg.window, cfg.horizon, |d| {
            roi::roi(m, d, cfg.horizon, market, &cfg.region)
        })?;
        Ok((rows, samples))
    })?;
    let mut all_rows = Vec::with_capacity(per_machine.len());
    let mut all_samples = Vec::new();
    for (rows, samples) in per_machine {
        all_rows.push(rows);
        all_samples.extend(samples);
    }
    Ok((all_rows, all_samples))
}
