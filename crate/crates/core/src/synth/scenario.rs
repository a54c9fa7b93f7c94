//! Seeded synthetic machines and market series with piecewise regimes.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use std::path::Path;

use crate::dataset::ingest::{
    interpolate_daily, write_chain_csv, write_energy_csv, write_prices_csv, write_specs_csv, write_text,
};
use crate::dataset::{DataManifest, DateRange, FeatureOrder, NamedSplit, SplitPlan};
use crate::error::{Error, Result};
use crate::roi::{daily_energy_cost, MachineSpec, Market, MarketDay, BLOCKS_PER_DAY, HORIZON_DAYS};

/// Drift and volatility over one half-open date range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub range: DateRange,
    /// BTC price change per day, USD.
    pub price_drift: f64,
    /// Network hashrate change per day, TH/s.
    pub hashrate_drift: f64,
    /// Daily noise as a fraction of the initial level.
    #[serde(default)]
    pub volatility: f64,
}

fn d_region() -> String {
    "synthetic".into()
}
fn d_price() -> f64 {
    10_000.0
}
fn d_hashrate() -> f64 {
    1.0e8
}
fn d_reward() -> f64 {
    12.5
}
fn d_fees() -> f64 {
    50.0
}
fn d_quote_every() -> u32 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_machines: usize,
    /// Regimes must tile this range without gaps or overlaps.
    pub range: DateRange,
    pub regimes: Vec<Regime>,
    /// USD/kWh, constant.
    pub electricity_rate: f64,
    #[serde(default = "d_region")]
    pub region: String,
    pub halving_dates: Vec<NaiveDate>,
    pub seed: u64,
    #[serde(default = "d_price")]
    pub initial_btc_price: f64,
    /// TH/s.
    #[serde(default = "d_hashrate")]
    pub initial_network_hashrate: f64,
    /// BTC per block on the first day; halves on each later halving date.
    #[serde(default = "d_reward")]
    pub initial_block_reward: f64,
    /// BTC per day.
    #[serde(default = "d_fees")]
    pub transaction_fees: f64,
    /// Days between machine price quotes; daily prices are interpolated in between.
    #[serde(default = "d_quote_every")]
    pub quote_every: u32,
}

fn date(s: &str) -> NaiveDate {
    s.parse().expect("valid literal date")
}

fn range(a: &str, b: &str) -> DateRange {
    DateRange::new(date(a), date(b)).expect("ordered literal range")
}

pub fn default_halvings() -> Vec<NaiveDate> {
    ["2012-11-28", "2016-07-09", "2020-05-11", "2024-04-20"].map(date).to_vec()
}

impl ScenarioConfig {
    /// Bull, bear, then sideways regimes over 2019–2023: enough history for
    /// a three-split expanding-window plan plus a final test range.
    pub fn three_regime(seed: u64) -> Self {
        Self {
            n_machines: 6,
            range: range("2019-01-01", "2023-07-01"),
            regimes: vec![
                Regime {
                    range: range("2019-01-01", "2020-07-01"),
                    price_drift: 25.0,
                    hashrate_drift: 5.0e4,
                    volatility: 0.01,
                },
                Regime {
                    range: range("2020-07-01", "2021-10-01"),
                    price_drift: -17.0,
                    hashrate_drift: 1.0e5,
                    volatility: 0.01,
                },
                Regime {
                    range: range("2021-10-01", "2023-07-01"),
                    price_drift: 2.0,
                    hashrate_drift: 2.0e4,
                    volatility: 0.01,
                },
            ],
            electricity_rate: 0.05,
            region: d_region(),
            halving_dates: default_halvings(),
            seed,
            initial_btc_price: d_price(),
            initial_network_hashrate: d_hashrate(),
            initial_block_reward: d_reward(),
            transaction_fees: d_fees(),
            quote_every: d_quote_every(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_machines == 0 {
            problems.push("n_machines must be at least 1".to_string());
        }
        if self.regimes.is_empty() {
            problems.push("at least one regime is required".to_string());
        } else {
            if self.regimes[0].range.start != self.range.start {
                problems.push(format!("first regime must start on {}", self.range.start));
            }
            if self.regimes.last().unwrap().range.end != self.range.end {
                problems.push(format!("last regime must end on {}", self.range.end));
            }
            for w in self.regimes.windows(2) {
                if w[0].range.end != w[1].range.start {
                    problems.push(format!(
                        "regimes must be contiguous: {} then {}",
                        w[0].range.end, w[1].range.start
                    ));
                }
            }
            for r in &self.regimes {
                if !(r.volatility >= 0.0 && r.volatility.is_finite()) {
                    problems.push(format!("volatility must be non-negative, got {}", r.volatility));
                }
            }
        }
        for (name, v) in [
            ("electricity_rate", self.electricity_rate),
            ("transaction_fees", self.transaction_fees),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("initial_btc_price", self.initial_btc_price),
            ("initial_network_hashrate", self.initial_network_hashrate),
            ("initial_block_reward", self.initial_block_reward),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if self.quote_every == 0 {
            problems.push("quote_every must be at least 1".to_string());
        }
        if !self.halving_dates.iter().any(|h| *h <= self.range.start) {
            problems.push(format!("halving_dates needs a halving on or before {}", self.range.start));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    fn regime_on(&self, d: NaiveDate) -> &Regime {
        self.regimes.iter().find(|r| r.range.contains(d)).expect("regimes tile the range")
    }

    fn reward_on(&self, d: NaiveDate) -> f64 {
        let halvings = self.halving_dates.iter().filter(|h| **h > self.range.start && **h <= d).count();
        self.initial_block_reward / 2f64.powi(halvings as i32)
    }
}

/// Expanding-window plan matching [`ScenarioConfig::three_regime`]: three
/// quarterly evaluation ranges, then a one-year final test range.
pub fn three_regime_plan() -> SplitPlan {
    let split = |name: &str, train_end: &str, eval_end: &str| NamedSplit {
        name: name.into(),
        train: range("2019-01-01", train_end),
        eval: range(train_end, eval_end),
    };
    SplitPlan {
        splits: vec![
            split("split1", "2020-10-01", "2021-01-01"),
            split("split2", "2021-01-01", "2021-04-01"),
            split("split3", "2021-04-01", "2021-07-01"),
        ],
        final_split: split("final", "2021-07-01", "2022-07-01"),
    }
}

/// File names written by [`write_scenario`].
pub const SCENARIO_FILES: [&str; 5] = ["machines.csv", "prices.csv", "chain.csv", "energy.csv", "data.toml"];

/// Generates the scenario and writes the four source CSVs plus a data
/// manifest (`data.toml`) referencing them. Returns the manifest.
pub fn write_scenario(dir: &Path, s: &ScenarioConfig, window: usize, plan: SplitPlan) -> Result<DataManifest> {
    let (machines, market) = generate(s)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let [specs, prices, chain, energy, manifest_name] = SCENARIO_FILES;
    write_specs_csv(&dir.join(specs), &machines)?;
    write_prices_csv(&dir.join(prices), &machines)?;
    write_chain_csv(&dir.join(chain), &market)?;
    write_energy_csv(&dir.join(energy), &market)?;
    let manifest = DataManifest {
        machine_specs: specs.into(),
        machine_prices: vec![prices.into()],
        chain: chain.into(),
        energy: energy.into(),
        region: s.region.clone(),
        window,
        horizon: HORIZON_DAYS,
        halving_dates: s.halving_dates.clone(),
        features: FeatureOrder::default(),
        plan,
    };
    manifest.validate()?;
    write_text(&dir.join(manifest_name), &manifest.to_toml()?)?;
    Ok(manifest)
}

/// Hashes per second behind one unit of difficulty at a 600 s block target.
fn difficulty_of(network_ths: f64) -> f64 {
    network_ths * 1e12 * 600.0 / 2f64.powi(32)
}

/// Machines and a gap-free market, a pure function of the scenario.
pub fn generate(s: &ScenarioConfig) -> Result<(Vec<MachineSpec>, Market)> {
    s.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let n_days = (s.range.end - s.range.start).num_days() as u64;
    let mut days = Vec::with_capacity(n_days as usize);
    let (mut price, mut hashrate) = (s.initial_btc_price, s.initial_network_hashrate);
    for k in 0..n_days {
        let d = s.range.start + Days::new(k);
        if k > 0 {
            let r = s.regime_on(d);
            let (e1, e2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            price = (price + r.price_drift + r.volatility * s.initial_btc_price * e1).max(0.05 * s.initial_btc_price);
            hashrate = (hashrate + r.hashrate_drift + r.volatility * s.initial_network_hashrate * e2)
                .max(0.05 * s.initial_network_hashrate);
        }
        let reward = s.reward_on(d);
        let day = MarketDay {
            date: d,
            btc_price: price,
            difficulty: difficulty_of(hashrate),
            network_hashrate: hashrate,
            network_revenue: (BLOCKS_PER_DAY * reward + s.transaction_fees) * price,
            block_reward: reward,
            transaction_fees: s.transaction_fees,
            electricity_rates: BTreeMap::from([(s.region.clone(), s.electricity_rate)]),
        };
        day.validate()?;
        days.push(day);
    }
    let market = Market::new(days)?;

    let release_span = (n_days / 3).max(1);
    let mut machines = Vec::with_capacity(s.n_machines);
    for i in 0..s.n_machines {
        let hashrate_ths = rng.random_range(10.0..150.0);
        let efficiency_jth = rng.random_range(20.0..90.0);
        let power_w = hashrate_ths * efficiency_jth;
        let release = s.range.start + Days::new(rng.random_range(0..release_span));
        // Sellers price a machine at a fixed number of days of current profit.
        let payback_days = rng.random_range(150.0..700.0);
        let mut prices = BTreeMap::new();
        let last = s.range.end - Days::new(1);
        let mut d = release;
        loop {
            let day = market.day(d)?;
            let profit = hashrate_ths / day.network_hashrate * day.network_revenue
                - daily_energy_cost(power_w, s.electricity_rate)?;
            prices.insert(d, (payback_days * profit).max(50.0));
            if d == last {
                break;
            }
            d = (d + Days::new(u64::from(s.quote_every))).min(last);
        }
        machines.push(MachineSpec::new(
            format!("synth-{i:02}"),
            hashrate_ths,
            power_w,
            efficiency_jth,
            release,
            interpolate_daily(&prices),
        )?);
    }
    Ok((machines, market))
}
