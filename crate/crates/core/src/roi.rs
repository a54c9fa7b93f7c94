//! Per-day mining economics and one-year ROI labeling.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ROI horizon in days.
pub const HORIZON_DAYS: u32 = 365;

/// Nominal blocks mined per day, used by [`RevenueModel::RewardPlusFees`].
pub const BLOCKS_PER_DAY: f64 = 144.0;

/// Relative tolerance for the efficiency ≈ power / hashrate consistency flag.
pub const EFFICIENCY_TOLERANCE: f64 = 0.05;

/// Static attributes of one ASIC model plus its daily USD price quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineSpec {
    pub id: String,
    pub hashrate_ths: f64,
    pub power_w: f64,
    pub efficiency_jth: f64,
    pub release_date: NaiveDate,
    pub prices: BTreeMap<NaiveDate, f64>,
}

impl MachineSpec {
    pub fn new(
        id: impl Into<String>,
        hashrate_ths: f64,
        power_w: f64,
        efficiency_jth: f64,
        release_date: NaiveDate,
        prices: BTreeMap<NaiveDate, f64>,
    ) -> Result<Self> {
        let id = id.into();
        for (name, v) in [
            ("hashrate", hashrate_ths),
            ("power", power_w),
            ("efficiency", efficiency_jth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("machine {id}: {name} must be positive, got {v}")));
            }
        }
        if let Some((d, p)) = prices.iter().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::domain(format!("machine {id}: price on {d} must be positive, got {p}")));
        }
        Ok(Self {
            id,
            hashrate_ths,
            power_w,
            efficiency_jth,
            release_date,
            prices,
        })
    }

    /// Relative deviation of the stated efficiency from power / hashrate, when it
    /// exceeds [`EFFICIENCY_TOLERANCE`]. Inconsistent specs are flagged, not rejected.
    pub fn efficiency_mismatch(&self) -> Option<f64> {
        let implied = self.power_w / self.hashrate_ths;
        let rel = (self.efficiency_jth - implied).abs() / implied;
        (rel > EFFICIENCY_TOLERANCE).then_some(rel)
    }

    pub fn price_on(&self, date: NaiveDate) -> Result<f64> {
        self.prices.get(&date).copied().ok_or_else(|| Error::Coverage {
            what: format!("price of machine {}", self.id),
            date,
        })
    }
}

/// One calendar day of chain, market and energy observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub btc_price: f64,
    pub difficulty: f64,
    /// TH/s.
    pub network_hashrate: f64,
    /// USD per day paid to all miners.
    pub network_revenue: f64,
    /// BTC per block.
    pub block_reward: f64,
    /// BTC per day.
    pub transaction_fees: f64,
    /// USD/kWh per region.
    pub electricity_rates: BTreeMap<String, f64>,
}

impl MarketDay {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("btc_price", self.btc_price),
            ("difficulty", self.difficulty),
            ("network_revenue", self.network_revenue),
            ("block_reward", self.block_reward),
            ("transaction_fees", self.transaction_fees),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{}: {name} must be non-negative, got {v}", self.date)));
            }
        }
        if !(self.network_hashrate.is_finite() && self.network_hashrate > 0.0) {
            return Err(Error::domain(format!(
                "{}: network_hashrate must be positive, got {}",
                self.date, self.network_hashrate
            )));
        }
        for (region, r) in &self.electricity_rates {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::domain(format!("{}: rate for {region} must be non-negative, got {r}", self.date)));
            }
        }
        Ok(())
    }

    pub fn rate(&self, region: &str) -> Result<f64> {
        self.electricity_rates.get(region).copied().ok_or_else(|| Error::Coverage {
            what: format!("electricity rate for region {region}"),
            date: self.date,
        })
    }
}

/// A gap-free daily market series.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    days: Vec<MarketDay>,
}

impl Market {
    /// Builds a market from days sorted by date with no gaps or duplicates.
    pub fn new(days: Vec<MarketDay>) -> Result<Self> {
        for d in &days {
            d.validate()?;
        }
        for pair in days.windows(2) {
            if pair[0].date.succ_opt() != Some(pair[1].date) {
                return Err(Error::domain(format!(
                    "market days must be consecutive: {} followed by {}",
                    pair[0].date, pair[1].date
                )));
            }
        }
        Ok(Self { days })
    }

    pub fn days(&self) -> &[MarketDay] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.days.first().map(|d| d.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.days.last().map(|d| d.date)
    }

    pub fn get(&self, date: NaiveDate) -> Option<&MarketDay> {
        let first = self.first_date()?;
        let offset = (date - first).num_days();
        if offset < 0 {
            return None;
        }
        self.days.get(offset as usize)
    }

    pub fn day(&self, date: NaiveDate) -> Result<&MarketDay> {
        self.get(date).ok_or_else(|| Error::Coverage {
            what: "market day".into(),
            date,
        })
    }

    /// Mutable access for scenario perturbation in tests and tools.
    pub fn get_mut(&mut self, date: NaiveDate) -> Option<&mut MarketDay> {
        let first = self.first_date()?;
        let offset = (date - first).num_days();
        if offset < 0 {
            return None;
        }
        self.days.get_mut(offset as usize)
    }
}

/// ROI class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RoiClass {
    Unprofitable = 0,
    Marginal = 1,
    Profitable = 2,
}

impl RoiClass {
    pub const ALL: [RoiClass; 3] = [RoiClass::Unprofitable, RoiClass::Marginal, RoiClass::Profitable];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn legend(self) -> &'static str {
        match self {
            RoiClass::Unprofitable => "unprofitable (ROI <= 0)",
            RoiClass::Marginal => "marginal (0 < ROI < 1)",
            RoiClass::Profitable => "profitable (ROI >= 1)",
        }
    }
}

impl fmt::Display for RoiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Where per-machine revenue comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevenueModel {
    /// Proportional share of the reported network revenue in USD.
    #[default]
    NetworkRevenue,
    /// Proportional share of (blocks/day × reward + fees) × BTC price.
    RewardPlusFees,
}

impl RevenueModel {
    pub fn network_revenue_usd(self, day: &MarketDay) -> f64 {
        match self {
            RevenueModel::NetworkRevenue => day.network_revenue,
            RevenueModel::RewardPlusFees => {
                (BLOCKS_PER_DAY * day.block_reward + day.transaction_fees) * day.btc_price
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiResult {
    pub roi: f64,
    pub revenue_total: f64,
    pub op_cost_total: f64,
    pub capital: f64,
    pub label: RoiClass,
}

/// Electricity cost in USD per day: `(power × 24 / 1000) × rate`.
pub fn daily_energy_cost(power_w: f64, rate_usd_per_kwh: f64) -> Result<f64> {
    if !(power_w >= 0.0 && rate_usd_per_kwh >= 0.0) {
        return Err(Error::domain(format!(
            "energy cost needs non-negative power and rate, got {power_w} W at {rate_usd_per_kwh} USD/kWh"
        )));
    }
    Ok((power_w * 24.0 / 1000.0) * rate_usd_per_kwh)
}

/// Expected USD revenue per day for a machine holding a proportional share of
/// the network hashrate.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn daily_machine_revenue(machine_ths: f64, network_ths: f64, network_revenue_usd: f64) -> Result<f64> {
    if !(network_ths > 0.0) {
        return Err(Error::domain(format!("network hashrate must be positive, got {network_ths}")));
    }
    if !(machine_ths >= 0.0) {
        return Err(Error::domain(format!("machine hashrate must be non-negative, got {machine_ths}")));
    }
    Ok((machine_ths / network_ths) * network_revenue_usd)
}

/// Maps an ROI value to its class with inclusive outer boundaries.
pub fn label(roi: f64) -> Result<RoiClass> {
    if !roi.is_finite() {
        return Err(Error::domain(format!("roi must be finite, got {roi}")));
    }
    Ok(if roi <= 0.0 {
        RoiClass::Unprofitable
    } else if roi < 1.0 {
        RoiClass::Marginal
    } else {
        RoiClass::Profitable
    })
}

/// Whole days since the most recent halving on or before `date`.
pub fn days_since_halving(date: NaiveDate, halvings: &[NaiveDate]) -> Result<i64> {
    halvings
        .iter()
        .filter(|h| **h <= date)
        .max()
        .map(|h| (date - *h).num_days())
        .ok_or_else(|| Error::domain(format!("no halving on or before {date}")))
}

/// Revenue and operating-cost totals over `[start, start + days)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accrual {
    pub revenue: f64,
    pub op_cost: f64,
}

/// Accumulates per-day revenue and electricity cost over `[start, start + days)`.
pub fn accrue(
    machine: &MachineSpec,
    start: NaiveDate,
    days: u32,
    market: &Market,
    region: &str,
    model: RevenueModel,
) -> Result<Accrual> {
    let mut acc = Accrual::default();
    for k in 0..days {
        let date = start + Days::new(u64::from(k));
        let day = market.day(date)?;
        acc.revenue += daily_machine_revenue(
            machine.hashrate_ths,
            day.network_hashrate,
            model.network_revenue_usd(day),
        )?;
        acc.op_cost += daily_energy_cost(machine.power_w, day.rate(region)?)?;
    }
    Ok(acc)
}

/// ROI of buying `machine` on `purchase_date` and mining for `horizon_days`,
/// with the default network-revenue model.
pub fn roi(
    machine: &MachineSpec,
    purchase_date: NaiveDate,
    horizon_days: u32,
    market: &Market,
    region: &str,
) -> Result<RoiResult> {
    roi_with(machine, purchase_date, horizon_days, market, region, RevenueModel::default())
}

pub fn roi_with(
    machine: &MachineSpec,
    purchase_date: NaiveDate,
    horizon_days: u32,
    market: &Market,
    region: &str,
    model: RevenueModel,
) -> Result<RoiResult> {
    let capital = machine.price_on(purchase_date)?;
    let acc = accrue(machine, purchase_date, horizon_days, market, region, model)?;
    let roi = (acc.revenue - acc.op_cost) / capital;
    Ok(RoiResult {
        roi,
        revenue_total: acc.revenue,
        op_cost_total: acc.op_cost,
        capital,
        label: label(roi)?,
    })
}
