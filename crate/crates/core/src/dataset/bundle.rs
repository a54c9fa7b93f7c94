//! Built datasets on disk.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! dataset.toml   window, horizon, region, feature order, halvings, split plan
//! features.csv   machine_id,date,<feature names...>   (every computable day)
//! samples.csv    machine_id,end_date,roi,label,assignment
//! hash           hex SHA-256 over the three files above
//! ```
//!
//! Windows are rebuilt from `features.csv` on load, so the same rows also
//! serve prediction on dates whose label horizon is not yet complete.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{FeatureOrder, NUM_FEATURES};
use super::manifest::DataManifest;
use super::splits::SplitPlan;
use super::windows::{build_samples, MachineRows, WindowConfig, WindowSample};
use super::{ingest, ingest::Ingested};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::roi::{Market, RoiClass};

pub const META_FILE: &str = "dataset.toml";
pub const FEATURES_FILE: &str = "features.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const HASH_FILE: &str = "hash";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub window: usize,
    pub horizon: u32,
    pub region: String,
    pub halving_dates: Vec<NaiveDate>,
    pub features: FeatureOrder,
    pub plan: SplitPlan,
}

impl DatasetMeta {
    pub fn window_config(&self) -> WindowConfig {
        WindowConfig {
            region: self.region.clone(),
            window: self.window,
            horizon: self.horizon,
            halvings: self.halving_dates.clone(),
            order: self.features.clone(),
        }
    }
}

/// Feature rows and labeled windows for every machine.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub rows: Vec<MachineRows>,
    pub samples: Vec<WindowSample>,
}

impl Dataset {
    /// Ingests the manifest's sources and labels every eligible window.
    pub fn build(manifest: &DataManifest, exec: Exec) -> Result<(Self, Vec<String>)> {
        let Ingested {
            machines,
            market,
            warnings,
        } = ingest::ingest(&manifest.sources())?;
        let ds = Self::from_market(&machines, &market, manifest, exec)?;
        Ok((ds, warnings))
    }

    pub fn from_market(
        machines: &[crate::roi::MachineSpec],
        market: &Market,
        manifest: &DataManifest,
        exec: Exec,
    ) -> Result<Self> {
        let cfg = manifest.window_config();
        let (rows, samples) = build_samples(machines, market, &cfg, exec)?;
        Ok(Self {
            meta: DatasetMeta {
                window: cfg.window,
                horizon: cfg.horizon,
                region: cfg.region,
                halving_dates: cfg.halvings,
                features: cfg.order,
                plan: manifest.plan.clone(),
            },
            rows,
            samples,
        })
    }

    pub fn machine_rows(&self, machine_id: &str) -> Option<&MachineRows> {
        self.rows.iter().find(|r| r.machine_id == machine_id)
    }

    /// Which split ranges contain a sample's end date, as `name:role` tags.
    pub fn assignment(&self, end: NaiveDate) -> String {
        let mut tags = Vec::new();
        for s in self.meta.plan.splits.iter() {
            if s.train.contains(end) {
                tags.push(format!("{}:train", s.name));
            }
            if s.eval.contains(end) {
                tags.push(format!("{}:eval", s.name));
            }
        }
        let f = &self.meta.plan.final_split;
        if f.train.contains(end) {
            tags.push(format!("{}:train", f.name));
        }
        if f.eval.contains(end) {
            tags.push(format!("{}:test", f.name));
        }
        tags.join(";")
    }

    /// Writes the dataset files and returns the dataset hash.
    pub fn save(&self, dir: &Path) -> Result<String> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = toml::to_string(&self.meta).map_err(|e| Error::config(e.to_string()))?;

        let mut features = String::from("machine_id,date");
        for k in self.meta.features.kinds() {
            features.push(',');
            features.push_str(k.name());
        }
        features.push('\n');
        for r in &self.rows {
            for (i, vals) in r.values.iter().enumerate() {
                features.push_str(&format!("{},{}", r.machine_id, r.date_of(i)));
                for v in vals {
                    features.push_str(&format!(",{v}"));
                }
                features.push('\n');
            }
        }

        let mut samples = String::from("machine_id,end_date,roi,label,assignment\n");
        for s in &self.samples {
            samples.push_str(&format!(
                "{},{},{},{},{}\n",
                s.machine_id,
                s.end_date,
                s.roi,
                s.label.index(),
                self.assignment(s.end_date)
            ));
        }

        let hash = content_hash(&[
            (META_FILE, meta.as_bytes()),
            (FEATURES_FILE, features.as_bytes()),
            (SAMPLES_FILE, samples.as_bytes()),
        ]);
        for (name, body) in [
            (META_FILE, meta.as_str()),
            (FEATURES_FILE, features.as_str()),
            (SAMPLES_FILE, samples.as_str()),
            (HASH_FILE, &format!("{hash}\n")),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(hash)
    }

    /// Loads a dataset directory, verifying its hash.
    pub fn load(dir: &Path) -> Result<(Self, String)> {
        let read = |name: &str| -> Result<Vec<u8>> {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let meta_b = read(META_FILE)?;
        let features_b = read(FEATURES_FILE)?;
        let samples_b = read(SAMPLES_FILE)?;
        let stored = String::from_utf8_lossy(&read(HASH_FILE)?).trim().to_string();
        let hash = content_hash(&[
            (META_FILE, &meta_b),
            (FEATURES_FILE, &features_b),
            (SAMPLES_FILE, &samples_b),
        ]);
        if hash != stored {
            return Err(Error::config(format!(
                "{}: content hash {hash} does not match stored {stored}",
                dir.display()
            )));
        }
        let meta: DatasetMeta = toml::from_str(&String::from_utf8_lossy(&meta_b))
            .map_err(|e| Error::config(format!("{}: {e}", dir.join(META_FILE).display())))?;
        let rows = parse_rows(&dir.join(FEATURES_FILE), &features_b)?;

        let path = dir.join(SAMPLES_FILE);
        let by_id: BTreeMap<&str, &MachineRows> = rows.iter().map(|r| (r.machine_id.as_str(), r)).collect();
        let mut samples = Vec::new();
        for (i, line) in String::from_utf8_lossy(&samples_b).lines().enumerate().skip(1) {
            let bad = |m: String| Error::Parse {
                path: path.clone(),
                line: i as u64 + 1,
                message: m,
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, found {}", f.len())));
            }
            let end: NaiveDate = f[1].parse().map_err(|e| bad(format!("bad date: {e}")))?;
            let roi: f64 = f[2].parse().map_err(|e| bad(format!("bad roi: {e}")))?;
            let label = f[3]
                .parse::<usize>()
                .ok()
                .and_then(RoiClass::from_index)
                .ok_or_else(|| bad(format!("bad label {:?}", f[3])))?;
            let rows = by_id.get(f[0]).ok_or_else(|| bad(format!("unknown machine {}", f[0])))?;
            let matrix = rows
                .window(end, meta.window)
                .ok_or_else(|| bad(format!("no full window ending {end}")))?;
            samples.push(WindowSample {
                machine_id: f[0].to_string(),
                end_date: end,
                matrix,
                label,
                roi,
            });
        }
        Ok((Self { meta, rows, samples }, hash))
    }
}

fn parse_rows(path: &Path, bytes: &[u8]) -> Result<Vec<MachineRows>> {
    let text = String::from_utf8_lossy(bytes);
    let mut out: Vec<MachineRows> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: m,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 2 + NUM_FEATURES {
            return Err(bad(format!("expected {} fields, found {}", 2 + NUM_FEATURES, f.len())));
        }
        let date: NaiveDate = f[1].parse().map_err(|e| bad(format!("bad date: {e}")))?;
        let mut vals = [0.0; NUM_FEATURES];
        for (slot, s) in vals.iter_mut().zip(&f[2..]) {
            *slot = s.parse().map_err(|e| bad(format!("bad value {s:?}: {e}")))?;
        }
        match out.last_mut() {
            Some(r) if r.machine_id == f[0] => {
                if r.date_of(r.len()) != date {
                    return Err(bad(format!("rows for {} are not consecutive at {date}", f[0])));
                }
                r.values.push(vals);
            }
            _ => out.push(MachineRows {
                machine_id: f[0].to_string(),
                start: date,
                values: vec![vals],
            }),
        }
    }
    Ok(out)
}

/// SHA-256 over named byte blobs, hex encoded.
pub fn content_hash(parts: &[(&str, &[u8])]) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in parts {
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}
