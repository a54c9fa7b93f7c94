use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roi::{self, MachineSpec, MarketDay};

pub const NUM_FEATURES: usize = 14;

/// One per-day input feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Hashrate,
    Power,
    Efficiency,
    DaysSinceRelease,
    MachinePrice,
    BtcPrice,
    Difficulty,
    NetworkHashrate,
    NetworkRevenue,
    BlockReward,
    TransactionFees,
    ElectricityRate,
    DaysSinceHalving,
    DailyRevenuePotential,
}

impl FeatureKind {
    pub const CANONICAL: [FeatureKind; NUM_FEATURES] = [
        FeatureKind::Hashrate,
        FeatureKind::Power,
        FeatureKind::Efficiency,
        FeatureKind::DaysSinceRelease,
        FeatureKind::MachinePrice,
        FeatureKind::BtcPrice,
        FeatureKind::Difficulty,
        FeatureKind::NetworkHashrate,
        FeatureKind::NetworkRevenue,
        FeatureKind::BlockReward,
        FeatureKind::TransactionFees,
        FeatureKind::ElectricityRate,
        FeatureKind::DaysSinceHalving,
        FeatureKind::DailyRevenuePotential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Hashrate => "hashrate",
            FeatureKind::Power => "power",
            FeatureKind::Efficiency => "efficiency",
            FeatureKind::DaysSinceRelease => "days_since_release",
            FeatureKind::MachinePrice => "machine_price",
            FeatureKind::BtcPrice => "btc_price",
            FeatureKind::Difficulty => "difficulty",
            FeatureKind::NetworkHashrate => "network_hashrate",
            FeatureKind::NetworkRevenue => "network_revenue",
            FeatureKind::BlockReward => "block_reward",
            FeatureKind::TransactionFees => "transaction_fees",
            FeatureKind::ElectricityRate => "electricity_rate",
            FeatureKind::DaysSinceHalving => "days_since_halving",
            FeatureKind::DailyRevenuePotential => "daily_revenue_potential",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::CANONICAL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown feature {s:?}")))
    }
}

/// A permutation of the fourteen features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureKind>", into = "Vec<FeatureKind>")]
pub struct FeatureOrder([FeatureKind; NUM_FEATURES]);

impl FeatureOrder {
    pub fn kinds(&self) -> &[FeatureKind; NUM_FEATURES] {
        &self.0
    }

    pub fn position(&self, kind: FeatureKind) -> usize {
        self.0.iter().position(|k| *k == kind).expect("order is a permutation")
    }
}

impl Default for FeatureOrder {
    fn default() -> Self {
        FeatureOrder(FeatureKind::CANONICAL)
    }
}

impl TryFrom<Vec<FeatureKind>> for FeatureOrder {
    type Error = Error;

    fn try_from(kinds: Vec<FeatureKind>) -> Result<Self> {
        let arr: [FeatureKind; NUM_FEATURES] = kinds
            .clone()
            .try_into()
            .map_err(|_| Error::config(format!("feature order needs {NUM_FEATURES} entries, got {}", kinds.len())))?;
        for k in FeatureKind::CANONICAL {
            if !arr.contains(&k) {
                return Err(Error::config(format!("feature order is missing {k}")));
            }
        }
        Ok(FeatureOrder(arr))
    }
}

impl From<FeatureOrder> for Vec<FeatureKind> {
    fn from(o: FeatureOrder) -> Self {
        o.0.to_vec()
    }
}

/// Feature values of one machine on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub machine_id: String,
    pub date: NaiveDate,
    pub values: [f64; NUM_FEATURES],
}

/// Computes the feature vector of `machine` on `day`. Every input is dated on or
/// before `day.date`.
pub fn feature_row(
    machine: &MachineSpec,
    day: &MarketDay,
    region: &str,
    halvings: &[NaiveDate],
    order: &FeatureOrder,
) -> Result<FeatureRow> {
    let date = day.date;
    if date < machine.release_date {
        return Err(Error::domain(format!(
            "machine {} is not released until {}, asked for {date}",
            machine.id, machine.release_date
        )));
    }
    let price = machine.price_on(date)?;
    let rate = day.rate(region)?;
    let revenue = roi::daily_machine_revenue(machine.hashrate_ths, day.network_hashrate, day.network_revenue)?;
    let cost = roi::daily_energy_cost(machine.power_w, rate)?;
    let since_halving = roi::days_since_halving(date, halvings)?;

    let mut values = [0.0; NUM_FEATURES];
    for (slot, kind) in values.iter_mut().zip(order.kinds()) {
        *slot = match kind {
            FeatureKind::Hashrate => machine.hashrate_ths,
            FeatureKind::Power => machine.power_w,
            FeatureKind::Efficiency => machine.efficiency_jth,
            FeatureKind::DaysSinceRelease => (date - machine.release_date).num_days() as f64,
            FeatureKind::MachinePrice => price,
            FeatureKind::BtcPrice => day.btc_price,
            FeatureKind::Difficulty => day.difficulty,
            FeatureKind::NetworkHashrate => day.network_hashrate,
            FeatureKind::NetworkRevenue => day.network_revenue,
            FeatureKind::BlockReward => day.block_reward,
            FeatureKind::TransactionFees => day.transaction_fees,
            FeatureKind::ElectricityRate => rate,
            FeatureKind::DaysSinceHalving => since_halving as f64,
            FeatureKind::DailyRevenuePotential => revenue - cost,
        };
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite feature {v} for {} on {date}", machine.id)));
    }
    Ok(FeatureRow {
        machine_id: machine.id.clone(),
        date,
        values,
    })
}
