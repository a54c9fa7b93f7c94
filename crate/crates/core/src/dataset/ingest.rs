//! CSV ingestion and emission for machine, chain and energy sources.
//!
//! Chain and energy series tolerate holes of up to [`MAX_FILL_DAYS`] missing
//! days, which are forward-filled from the previous observation. Machine price
//! quotes are interpolated linearly between observed dates and never
//! extrapolated.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::roi::{MachineSpec, Market, MarketDay};

pub const MAX_FILL_DAYS: i64 = 7;

pub const SPEC_HEADER: [&str; 5] = ["machine_id", "hashrate_ths", "power_w", "efficiency_jth", "release_date"];
pub const PRICE_HEADER: [&str; 3] = ["machine_id", "date", "price_usd"];
pub const CHAIN_HEADER: [&str; 7] = [
    "date",
    "btc_price_usd",
    "difficulty",
    "network_hashrate_ths",
    "network_revenue_usd",
    "block_reward_btc",
    "transaction_fees_btc",
];
pub const ENERGY_HEADER: [&str; 3] = ["date", "region", "rate_usd_per_kwh"];

/// Ingested data plus any non-fatal warnings (filled gaps, spec inconsistencies).
#[derive(Debug, Clone)]
pub struct Ingested {
    pub machines: Vec<MachineSpec>,
    pub market: Market,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SourcePaths {
    pub machine_specs: PathBuf,
    pub machine_prices: Vec<PathBuf>,
    pub chain: PathBuf,
    pub energy: PathBuf,
}

struct Table {
    path: PathBuf,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, header: &[&str]) -> Result<Table> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if found.iter().collect::<Vec<_>>() != header {
            return Err(parse_err(
                1,
                format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    fn date(&self, line: u64, field: &str) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|e| self.err(line, format!("bad date {field:?}: {e}")))
    }

    fn num(&self, line: u64, name: &str, field: &str) -> Result<f64> {
        let v: f64 = field
            .parse()
            .map_err(|e| self.err(line, format!("bad number for {name} {field:?}: {e}")))?;
        if !v.is_finite() {
            return Err(self.err(line, format!("{name} must be finite, got {field:?}")));
        }
        Ok(v)
    }
}

/// Reads all sources and joins them into machines and a gap-free market series.
pub fn ingest(paths: &SourcePaths) -> Result<Ingested> {
    let mut warnings = Vec::new();
    let mut specs = read_specs(&paths.machine_specs)?;
    let mut quotes: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for p in &paths.machine_prices {
        read_prices(p, &mut quotes)?;
    }
    let chain = read_chain(&paths.chain, &mut warnings)?;
    let energy = read_energy(&paths.energy, &mut warnings)?;

    let mut days = Vec::with_capacity(chain.len());
    for mut day in chain {
        for (region, series) in &energy {
            if let Some(r) = series.get(&day.date) {
                day.electricity_rates.insert(region.clone(), *r);
            }
        }
        days.push(day);
    }
    let market = Market::new(days)?;

    let mut machines = Vec::with_capacity(specs.len());
    for (id, (hashrate, power, eff, release)) in std::mem::take(&mut specs) {
        let q = quotes.remove(&id).unwrap_or_default();
        if q.is_empty() {
            warnings.push(format!("machine {id} has no price quotes"));
        }
        let m = MachineSpec::new(id, hashrate, power, eff, release, interpolate_daily(&q))?;
        if let Some(rel) = m.efficiency_mismatch() {
            warnings.push(format!(
                "machine {}: efficiency {} J/TH deviates {:.1}% from power/hashrate",
                m.id,
                m.efficiency_jth,
                rel * 100.0
            ));
        }
        machines.push(m);
    }
    for id in quotes.keys() {
        warnings.push(format!("price quotes for unknown machine {id} ignored"));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(Ingested {
        machines,
        market,
        warnings,
    })
}

type SpecFields = (f64, f64, f64, NaiveDate);

fn read_specs(path: &Path) -> Result<BTreeMap<String, SpecFields>> {
    let t = Table::read(path, &SPEC_HEADER)?;
    let mut out = BTreeMap::new();
    for (line, r) in &t.rows {
        let id = r[0].to_string();
        if id.is_empty() {
            return Err(t.err(*line, "empty machine_id"));
        }
        let fields = (
            t.num(*line, "hashrate_ths", &r[1])?,
            t.num(*line, "power_w", &r[2])?,
            t.num(*line, "efficiency_jth", &r[3])?,
            t.date(*line, &r[4])?,
        );
        if out.insert(id.clone(), fields).is_some() {
            return Err(t.err(*line, format!("duplicate machine {id}")));
        }
    }
    Ok(out)
}

fn read_prices(path: &Path, quotes: &mut BTreeMap<String, BTreeMap<NaiveDate, f64>>) -> Result<()> {
    let t = Table::read(path, &PRICE_HEADER)?;
    for (line, r) in &t.rows {
        let date = t.date(*line, &r[1])?;
        let price = t.num(*line, "price_usd", &r[2])?;
        if price <= 0.0 {
            return Err(t.err(*line, format!("price must be positive, got {price}")));
        }
        if quotes.entry(r[0].to_string()).or_default().insert(date, price).is_some() {
            return Err(t.err(*line, format!("duplicate quote for {} on {date}", &r[0])));
        }
    }
    Ok(())
}

/// Linear interpolation of sparse quotes onto every day between the first and last quote.
pub fn interpolate_daily(quotes: &BTreeMap<NaiveDate, f64>) -> BTreeMap<NaiveDate, f64> {
    let mut out = BTreeMap::new();
    let pts: Vec<_> = quotes.iter().map(|(d, p)| (*d, *p)).collect();
    if let Some(&(d, p)) = pts.first() {
        out.insert(d, p);
    }
    for pair in pts.windows(2) {
        let (d0, p0) = pair[0];
        let (d1, p1) = pair[1];
        let span = (d1 - d0).num_days();
        for k in 1..=span {
            let w = k as f64 / span as f64;
            let v = if k == span { p1 } else { p0 + (p1 - p0) * w };
            out.insert(d0 + Days::new(k as u64), v);
        }
    }
    out
}

/// Sorts dated rows, rejects duplicates, and forward-fills holes of up to
/// [`MAX_FILL_DAYS`] missing days.
fn fill_forward<T: Clone>(
    what: &str,
    mut rows: Vec<(NaiveDate, T)>,
    warnings: &mut Vec<String>,
    mut redate: impl FnMut(&mut T, NaiveDate),
) -> Result<Vec<(NaiveDate, T)>> {
    rows.sort_by_key(|(d, _)| *d);
    let mut out: Vec<(NaiveDate, T)> = Vec::with_capacity(rows.len());
    for (date, value) in rows {
        if let Some((prev, last)) = out.last().cloned() {
            let missing = (date - prev).num_days() - 1;
            if missing < 0 {
                return Err(Error::domain(format!("{what}: duplicate entry for {date}")));
            }
            if missing > MAX_FILL_DAYS {
                return Err(Error::Gap {
                    what: what.to_string(),
                    days: missing,
                    before: date,
                });
            }
            if missing > 0 {
                warnings.push(format!("{what}: forward-filled {missing} missing day(s) before {date}"));
            }
            for k in 1..=missing {
                let d = prev + Days::new(k as u64);
                let mut filled = last.clone();
                redate(&mut filled, d);
                out.push((d, filled));
            }
        }
        out.push((date, value));
    }
    Ok(out)
}

fn read_chain(path: &Path, warnings: &mut Vec<String>) -> Result<Vec<MarketDay>> {
    let t = Table::read(path, &CHAIN_HEADER)?;
    let mut rows = Vec::with_capacity(t.rows.len());
    for (line, r) in &t.rows {
        let date = t.date(*line, &r[0])?;
        let day = MarketDay {
            date,
            btc_price: t.num(*line, "btc_price_usd", &r[1])?,
            difficulty: t.num(*line, "difficulty", &r[2])?,
            network_hashrate: t.num(*line, "network_hashrate_ths", &r[3])?,
            network_revenue: t.num(*line, "network_revenue_usd", &r[4])?,
            block_reward: t.num(*line, "block_reward_btc", &r[5])?,
            transaction_fees: t.num(*line, "transaction_fees_btc", &r[6])?,
            electricity_rates: BTreeMap::new(),
        };
        day.validate().map_err(|e| t.err(*line, e.to_string()))?;
        rows.push((date, day));
    }
    let filled = fill_forward("chain data", rows, warnings, |d, date| d.date = date)?;
    Ok(filled.into_iter().map(|(_, d)| d).collect())
}

fn read_energy(path: &Path, warnings: &mut Vec<String>) -> Result<BTreeMap<String, HashMap<NaiveDate, f64>>> {
    let t = Table::read(path, &ENERGY_HEADER)?;
    let mut per_region: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for (line, r) in &t.rows {
        let date = t.date(*line, &r[0])?;
        let rate = t.num(*line, "rate_usd_per_kwh", &r[2])?;
        if rate < 0.0 {
            return Err(t.err(*line, format!("rate must be non-negative, got {rate}")));
        }
        per_region.entry(r[1].to_string()).or_default().push((date, rate));
    }
    let mut out = BTreeMap::new();
    for (region, rows) in per_region {
        let filled = fill_forward(&format!("energy rates for {region}"), rows, warnings, |_, _| {})?;
        out.insert(region, filled.into_iter().collect());
    }
    Ok(out)
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

pub fn write_specs_csv(path: &Path, machines: &[MachineSpec]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SPEC_HEADER).map_err(|e| csv_err(path, e))?;
    for m in machines {
        w.write_record([
            m.id.clone(),
            m.hashrate_ths.to_string(),
            m.power_w.to_string(),
            m.efficiency_jth.to_string(),
            m.release_date.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_prices_csv(path: &Path, machines: &[MachineSpec]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(PRICE_HEADER).map_err(|e| csv_err(path, e))?;
    for m in machines {
        for (d, p) in &m.prices {
            w.write_record([m.id.clone(), d.to_string(), p.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_chain_csv(path: &Path, market: &Market) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(CHAIN_HEADER).map_err(|e| csv_err(path, e))?;
    for d in market.days() {
        w.write_record([
            d.date.to_string(),
            d.btc_price.to_string(),
            d.difficulty.to_string(),
            d.network_hashrate.to_string(),
            d.network_revenue.to_string(),
            d.block_reward.to_string(),
            d.transaction_fees.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_energy_csv(path: &Path, market: &Market) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(ENERGY_HEADER).map_err(|e| csv_err(path, e))?;
    for d in market.days() {
        for (region, r) in &d.electricity_rates {
            w.write_record([d.date.to_string(), region.clone(), r.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes raw text; used by fixtures that need hand-made malformed files.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
