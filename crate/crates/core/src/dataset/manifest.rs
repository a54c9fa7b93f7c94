use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::features::FeatureOrder;
use super::ingest::SourcePaths;
use super::splits::SplitPlan;
use super::windows::WindowConfig;
use crate::error::{Error, Result};
use crate::roi::HORIZON_DAYS;

fn default_window() -> usize {
    30
}

fn default_horizon() -> u32 {
    HORIZON_DAYS
}

/// Data manifest: source files, scenario region, window settings, halving
/// calendar and split plan. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataManifest {
    pub machine_specs: PathBuf,
    pub machine_prices: Vec<PathBuf>,
    pub chain: PathBuf,
    pub energy: PathBuf,
    pub region: String,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    pub halving_dates: Vec<NaiveDate>,
    #[serde(default)]
    pub features: FeatureOrder,
    #[serde(default)]
    pub plan: SplitPlan,
}

impl DataManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DataManifest =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut m.machine_specs);
        m.machine_prices.iter_mut().for_each(resolve);
        resolve(&mut m.chain);
        resolve(&mut m.energy);
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.window < 2 {
            problems.push(format!("window must be at least 2, got {}", self.window));
        }
        if self.horizon == 0 {
            problems.push("horizon must be positive".to_string());
        }
        if self.halving_dates.is_empty() {
            problems.push("halving_dates must not be empty".to_string());
        }
        if self.machine_prices.is_empty() {
            problems.push("machine_prices must list at least one file".to_string());
        }
        if let Err(e) = self.plan.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }

    pub fn sources(&self) -> SourcePaths {
        SourcePaths {
            machine_specs: self.machine_specs.clone(),
            machine_prices: self.machine_prices.clone(),
            chain: self.chain.clone(),
            energy: self.energy.clone(),
        }
    }

    pub fn window_config(&self) -> WindowConfig {
        let mut halvings = self.halving_dates.clone();
        halvings.sort_unstable();
        WindowConfig {
            region: self.region.clone(),
            window: self.window,
            horizon: self.horizon,
            halvings,
            order: self.features.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
machine_specs = "machines.csv"
machine_prices = ["prices.csv"]
chain = "chain.csv"
energy = "energy.csv"
region = "texas"
halving_dates = ["2016-07-09", "2020-05-11"]

[[plan.splits]]
name = "split1"
train = ["2016-01-01", "2017-01-01"]
eval = ["2017-01-01", "2017-06-01"]

[plan.final]
name = "final"
train = ["2016-01-01", "2018-01-01"]
eval = ["2018-01-01", "2019-01-01"]
"#;

    #[test]
    fn parses_with_defaults_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.toml");
        std::fs::write(&p, TEXT).unwrap();
        let m = DataManifest::load(&p).unwrap();
        assert_eq!(m.window, 30);
        assert_eq!(m.horizon, 365);
        assert_eq!(m.chain, dir.path().join("chain.csv"));
        assert_eq!(m.plan.splits.len(), 1);
        assert_eq!(m.features, FeatureOrder::default());
        let again: DataManifest = toml::from_str(&m.to_toml().unwrap()).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn collects_all_problems() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.toml");
        let bad = TEXT.replace(r#"halving_dates = ["2016-07-09", "2020-05-11"]"#, "halving_dates = []\nwindow = 1");
        std::fs::write(&p, bad).unwrap();
        let err = DataManifest::load(&p).unwrap_err().to_string();
        assert!(err.contains("window") && err.contains("halving"), "{err}");
    }
}
