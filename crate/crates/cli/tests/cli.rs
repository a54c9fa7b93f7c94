use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;

const SMOKE: &str = r#"
seeds = [1, 2]
validation_fraction = 0.1

[model.mine_roi]
window = 30
features = 14
d_model = 8
n_heads = 2
n_layers = 1
d_ff = 16
dropout = 0.1

[train]
max_epochs = 1
learning_rate = 1e-3
"#;

fn mineroi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mineroi"))
        .args(args)
        .env("MINEROI_LOG", "error")
        .output()
        .expect("spawn mineroi")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Generated scenario under `root/data`, built dataset under `root/exp`.
fn built(root: &Path) {
    let data = root.join("data");
    let o = mineroi(&["generate", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mineroi(&["build", "--manifest", s(&data.join("data.toml")), "--out", s(&root.join("exp"))]);
    assert!(o.status.success(), "{}", stderr(&o));
}

fn smoke_config(root: &Path) -> String {
    let p = root.join("smoke.toml");
    std::fs::write(&p, SMOKE).unwrap();
    s(&p).to_string()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn help_and_version_succeed() {
    assert!(mineroi(&["--help"]).status.success());
    assert!(mineroi(&["--version"]).status.success());
    assert_eq!(mineroi(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn build_missing_file_names_path() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(mineroi(&["generate", "--out", s(&data)]).status.success());
    std::fs::remove_file(data.join("chain.csv")).unwrap();
    let o = mineroi(&["build", "--manifest", s(&data.join("data.toml")), "--out", s(&dir.path().join("exp"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chain.csv"), "{}", stderr(&o));
}

#[test]
fn build_counts_follow_window_arithmetic_and_hash_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    built(dir.path());
    let data = dir.path().join("data");
    let o = mineroi(&["build", "--manifest", s(&data.join("data.toml")), "--out", s(&dir.path().join("again"))]);
    assert!(o.status.success());
    let hash = |d: &str| std::fs::read_to_string(dir.path().join(d).join("dataset/hash")).unwrap();
    assert_eq!(hash("exp"), hash("again"));

    // Usable days run from release to the last day with both a price quote
    // and market data; each machine contributes n - L - 365 + 1 windows.
    let date = |t: &str| t.parse::<NaiveDate>().unwrap();
    let chain_last = csv_rows(&data.join("chain.csv")).iter().map(|r| date(&r[0])).max().unwrap();
    let mut price_last: BTreeMap<String, NaiveDate> = BTreeMap::new();
    for r in csv_rows(&data.join("prices.csv")) {
        let d = date(&r[1]);
        let e = price_last.entry(r[0].clone()).or_insert(d);
        *e = (*e).max(d);
    }
    let mut expected = 0i64;
    for r in csv_rows(&data.join("machines.csv")) {
        let last = price_last[&r[0]].min(chain_last);
        let n = (last - date(&r[4])).num_days() + 1;
        expected += (n - 30 - 365 + 1).max(0);
    }
    let samples = csv_rows(&dir.path().join("exp/dataset/samples.csv")).len() as i64;
    assert_eq!(samples, expected);
}

#[test]
fn cv_prints_one_row_per_split_plus_average() {
    let dir = tempfile::tempdir().unwrap();
    built(dir.path());
    let exp = dir.path().join("exp");
    let cfg = smoke_config(dir.path());
    let o = mineroi(&["cv", "--config", &cfg, "--data", s(&exp.join("dataset")), "--out", s(&exp)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 6, "{out}");
    assert!(lines[0].starts_with("MineROI-Net (L=30)"));
    for (line, name) in lines[2..].iter().zip(["split1", "split2", "split3", "Avg ± Std"]) {
        assert!(line.starts_with(name), "{line}");
        assert_eq!(line.matches('±').count(), if name.starts_with("Avg") { 3 } else { 2 });
    }
    assert_eq!(std::fs::read_to_string(exp.join("reports/cv_table.txt")).unwrap(), out);
    assert_eq!(csv_rows(&exp.join("reports/cv_reports.csv")).len(), 6);
    let manifest = std::fs::read_to_string(exp.join("manifest")).unwrap();
    assert!(manifest.contains("command = \"build\"") && manifest.contains("command = \"cv\""));
}

#[test]
fn eval_guard_five_seeds_and_predict() {
    let dir = tempfile::tempdir().unwrap();
    built(dir.path());
    let exp = dir.path().join("exp");
    let ds = exp.join("dataset");
    let cfg = smoke_config(dir.path());
    let args = ["eval", "--config", &cfg, "--data", s(&ds), "--out", s(&exp), "--seeds", "42..46"];
    let o = mineroi(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("(5 runs)"), "{out}");
    assert!(out.lines().skip(1).all(|l| l.starts_with("class") || l.contains('±')), "{out}");
    assert_eq!(csv_rows(&exp.join("reports/eval_reports.csv")).len(), 5);

    let again = mineroi(&args);
    assert_eq!(again.status.code(), Some(3));
    assert!(stderr(&again).contains("--force"));
    let mut forced = args.to_vec();
    forced[8] = "42";
    forced.push("--force");
    let f = mineroi(&forced);
    assert!(f.status.success(), "{}", stderr(&f));
    assert!(stdout(&f).contains("accuracy"));

    let ckpt = exp.join("checkpoints/seed-42.ckpt");
    let ask = |date: &str| mineroi(&["predict", "--checkpoint", s(&ckpt), "--data", s(&ds), "--machine", "synth-00", "--date", date]);
    let a = ask("2021-03-01");
    assert!(a.status.success(), "{}", stderr(&a));
    let line = stdout(&a);
    assert_eq!(line.lines().count(), 1);
    let field = |k: &str| -> f64 {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let i = toks.iter().position(|t| *t == k).unwrap();
        toks[i + 1].parse().unwrap()
    };
    let sum = field("p0") + field("p1") + field("p2");
    assert!((sum - 1.0).abs() < 2e-6, "{line}");
    assert!((field("class") as usize) < 3);
    assert!(line.contains("profitable (ROI >= 1)"));
    assert_eq!(stdout(&ask("2021-03-01")), line);

    let release = csv_rows(&dir.path().join("data/machines.csv"))[0][4].parse::<NaiveDate>().unwrap();
    let earliest = release + chrono::Days::new(29);
    let early = ask(&(earliest - chrono::Days::new(1)).to_string());
    assert_eq!(early.status.code(), Some(3));
    assert!(stderr(&early).contains(&earliest.to_string()), "{}", stderr(&early));
    assert!(ask(&earliest.to_string()).status.success());
}

#[test]
fn train_on_separable_data_reaches_high_validation_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let o = mineroi(&["generate", "--separable", "200", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/tiny_separable.toml");
    let o = mineroi(&["train", "--config", cfg, "--data", s(&dir.path().join("dataset")), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let acc: f64 = out
        .split("validation accuracy ")
        .nth(1)
        .and_then(|t| t.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(acc >= 0.90, "{out}");
    assert!(dir.path().join("checkpoints/seed-1.ckpt").exists());
}

#[test]
fn config_problems_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let o = mineroi(&["generate", "--separable", "10", "--out", s(dir.path())]);
    assert!(o.status.success());
    let bad = SMOKE
        .replace("seeds = [1, 2]", "seeds = []")
        .replace("validation_fraction = 0.1", "validation_fraction = 0.7")
        .replace("window = 30", "window = 60");
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, bad).unwrap();
    let o = mineroi(&["train", "--config", s(&p), "--data", s(&dir.path().join("dataset")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    for needle in ["seed", "validation_fraction", "window 60"] {
        assert!(err.contains(needle), "{err}");
    }
}
