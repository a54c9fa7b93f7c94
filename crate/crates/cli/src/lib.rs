//! `mineroi` command implementations. `main` only sets up logging and maps
//! [`CliError`] to the process exit code.

mod error;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use mineroi_core::dataset::{Dataset, SampleStore, NUM_FEATURES};
use mineroi_core::eval::{confusion_csv, cross_validate, final_evaluation, reports_csv, train_final, CvConfig, FinalRun};
use mineroi_core::nn::checkpoint::{Architecture, Checkpoint};
use mineroi_core::roi::RoiClass;
use mineroi_core::synth::{three_regime_plan, write_scenario, ScenarioConfig};
use mineroi_core::Exec;

pub use error::{CliError, CliResult, EXIT_INPUT, EXIT_INTERNAL, EXIT_PRECONDITION};
pub use manifest::{ManifestLog, RunManifest, MANIFEST_FILE};

/// Environment variable holding the log filter (`error`, `warn`, `info`, `debug`).
pub const LOG_ENV: &str = "MINEROI_LOG";

pub const DATASET_DIR: &str = "dataset";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const REPORT_DIR: &str = "reports";

#[derive(Debug, Parser)]
#[command(name = "mineroi", version, about = "Bitcoin ASIC purchase-day ROI classification")]
pub struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic three-regime scenario: source CSVs plus `data.toml`.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        window: usize,
        /// Instead write a built dataset (`<out>/dataset`) of linearly
        /// separable windows, this many per class.
        #[arg(long, value_name = "N_PER_CLASS")]
        separable: Option<usize>,
    },
    /// Ingest a data manifest and write the labeled window dataset.
    Build {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one checkpoint per seed on the final training range.
    Train(Experiment),
    /// Expanding-window cross-validation over the dataset's split plan.
    Cv(Experiment),
    /// Retrain on the final training range and score the test range.
    Eval {
        #[command(flatten)]
        exp: Experiment,
        /// Score the test range again even if this directory already did.
        #[arg(long)]
        force: bool,
    },
    /// Classify one purchase date for one machine.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        machine: String,
        #[arg(long)]
        date: NaiveDate,
    },
}

#[derive(Debug, Args)]
pub struct Experiment {
    /// Experiment TOML: `model`, `train`, `seeds`, `validation_fraction`.
    #[arg(long)]
    pub config: PathBuf,
    /// Dataset directory written by `build`.
    #[arg(long)]
    pub data: PathBuf,
    /// `42..46` (inclusive), `1,2,3` or a single seed; overrides the config.
    #[arg(long, value_parser = parse_seeds)]
    pub seeds: Option<Seeds>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seeds(pub Vec<u64>);

pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a > b {
            return Err(format!("empty seed range {s}"));
        }
        return Ok(Seeds((a..=b).collect()));
    }
    s.split(',').map(num).collect::<Result<_, _>>().map(Seeds)
}

/// Parses `argv` (program name first) and runs the command.
pub fn run(argv: Vec<String>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests print to stdout and succeed.
            return if e.use_stderr() { Err(CliError::input("")) } else { Ok(()) };
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let args: Vec<String> = argv.into_iter().skip(1).collect();
    match cli.command {
        Command::Generate {
            out,
            seed,
            window,
            separable: Some(n),
        } => generate_separable(&out, seed, window, n, args),
        Command::Generate { out, seed, window, .. } => generate(&out, seed, window, args),
        Command::Build { manifest, out } => build(&manifest, &out, exec, args),
        Command::Train(exp) => train(&exp, exec, args),
        Command::Cv(exp) => cv(&exp, exec, args),
        Command::Eval { exp, force } => eval(&exp, force, exec, args),
        Command::Predict {
            checkpoint,
            data,
            machine,
            date,
        } => predict(&checkpoint, &data, &machine, date, exec),
    }
}

fn record(command: &str, args: Vec<String>, out: &Path) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        args,
        config: None,
        data_hash: None,
        seeds: Vec::new(),
        out_dir: out.to_path_buf(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        test_range: None,
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, body: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))
}

fn generate(out: &Path, seed: u64, window: usize, args: Vec<String>) -> CliResult<()> {
    let manifest = write_scenario(out, &ScenarioConfig::three_regime(seed), window, three_regime_plan())?;
    ManifestLog::append(
        out,
        RunManifest {
            seeds: vec![seed],
            ..record("generate", args, out)
        },
    )?;
    println!(
        "wrote three-regime scenario (seed {seed}, window {}) to {}",
        manifest.window,
        out.display()
    );
    Ok(())
}

fn generate_separable(out: &Path, seed: u64, window: usize, n_per_class: usize, args: Vec<String>) -> CliResult<()> {
    if window < 2 || n_per_class < 10 {
        return Err(CliError::input("separable data needs window >= 2 and at least 10 samples per class"));
    }
    let ds = mineroi_core::synth::separable_bundle(window, n_per_class, seed)?;
    create_dir(out)?;
    let hash = ds.save(&out.join(DATASET_DIR))?;
    ManifestLog::append(
        out,
        RunManifest {
            seeds: vec![seed],
            data_hash: Some(hash.clone()),
            ..record("generate", args, out)
        },
    )?;
    println!("{} separable samples, window {window}, hash {hash}", ds.samples.len());
    Ok(())
}

fn build(manifest_path: &Path, out: &Path, exec: Exec, args: Vec<String>) -> CliResult<()> {
    let manifest = mineroi_core::dataset::DataManifest::load(manifest_path)?;
    let (ds, warnings) = Dataset::build(&manifest, exec)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    create_dir(out)?;
    let hash = ds.save(&out.join(DATASET_DIR))?;
    ManifestLog::append(
        out,
        RunManifest {
            config: Some(manifest_path.to_path_buf()),
            data_hash: Some(hash.clone()),
            ..record("build", args, out)
        },
    )?;
    println!(
        "{} samples from {} machines, window {}, hash {hash}",
        ds.samples.len(),
        ds.rows.len(),
        ds.meta.window
    );
    Ok(())
}

struct Loaded {
    cfg: CvConfig,
    ds: Dataset,
    hash: String,
}

/// Reads the experiment config and dataset, listing every config problem at once.
fn load_experiment(exp: &Experiment) -> CliResult<Loaded> {
    let text =
        fs::read_to_string(&exp.config).map_err(|e| CliError::input(format!("{}: {e}", exp.config.display())))?;
    let mut cfg: CvConfig =
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", exp.config.display())))?;
    if let Some(seeds) = &exp.seeds {
        cfg.seeds = seeds.0.clone();
    }
    let (ds, hash) = Dataset::load(&exp.data)?;
    let mut problems = Vec::new();
    if let Err(e) = cfg.validate() {
        problems.push(e.to_string());
    }
    if cfg.model.window() != ds.meta.window {
        problems.push(format!(
            "model window {} does not match dataset window {}",
            cfg.model.window(),
            ds.meta.window
        ));
    }
    if cfg.model.features() != NUM_FEATURES {
        problems.push(format!(
            "model expects {} features, dataset rows have {NUM_FEATURES}",
            cfg.model.features()
        ));
    }
    if !problems.is_empty() {
        return Err(CliError::input(format!(
            "{}: {}",
            exp.config.display(),
            problems.join("; ")
        )));
    }
    Ok(Loaded { cfg, ds, hash })
}

fn experiment_record(command: &str, args: Vec<String>, exp: &Experiment, l: &Loaded) -> RunManifest {
    RunManifest {
        config: Some(exp.config.clone()),
        data_hash: Some(l.hash.clone()),
        seeds: l.cfg.seeds.clone(),
        ..record(command, args, &exp.out)
    }
}

fn write_runs(out: &Path, prefix: &str, runs: &[FinalRun]) -> CliResult<()> {
    let (ckpts, reports) = (out.join(CHECKPOINT_DIR), out.join(REPORT_DIR));
    create_dir(&ckpts)?;
    create_dir(&reports)?;
    for r in runs {
        r.checkpoint.save(&ckpts.join(format!("seed-{}.ckpt", r.seed)))?;
        write(
            &reports.join(format!("{prefix}history_seed-{}.csv", r.seed)),
            r.history.to_csv(),
        )?;
    }
    Ok(())
}

fn train(exp: &Experiment, exec: Exec, args: Vec<String>) -> CliResult<()> {
    let l = load_experiment(exp)?;
    let store = SampleStore::new(l.ds.samples.clone());
    let runs = train_final(&store, &l.ds.meta.plan, &l.ds.meta.features, &l.cfg, exec)?;
    write_runs(&exp.out, "train_", &runs)?;
    for r in &runs {
        let sel = r.history.selected();
        let val = match (sel.val_acc, sel.val_macro_f1) {
            (Some(a), Some(f)) => format!(", validation accuracy {a:.3}, macro-F1 {f:.3}"),
            _ => String::new(),
        };
        println!(
            "seed {}: epoch {} of {}, train loss {:.4}{val}",
            r.seed,
            sel.epoch,
            r.history.epochs.len(),
            sel.train_loss
        );
    }
    ManifestLog::append(&exp.out, experiment_record("train", args, exp, &l))
}

fn cv(exp: &Experiment, exec: Exec, args: Vec<String>) -> CliResult<()> {
    let l = load_experiment(exp)?;
    let store = SampleStore::new(l.ds.samples.clone());
    let result = cross_validate(&store, &l.ds.meta.plan, &l.cfg, exec)?;
    let reports = exp.out.join(REPORT_DIR);
    create_dir(&reports)?;
    for r in &result.runs {
        write(
            &reports.join(format!("cv_history_{}_seed-{}.csv", r.split, r.seed)),
            r.history.to_csv(),
        )?;
    }
    let all = result.reports();
    write(&reports.join("cv_reports.csv"), reports_csv(&all))?;
    write(&reports.join("cv_confusion.csv"), confusion_csv(&all))?;
    write(&reports.join("cv_table.txt"), &result.table)?;
    print!("{}", result.table);
    ManifestLog::append(&exp.out, experiment_record("cv", args, exp, &l))
}

fn eval(exp: &Experiment, force: bool, exec: Exec, args: Vec<String>) -> CliResult<()> {
    let l = load_experiment(exp)?;
    let test = l.ds.meta.plan.final_split.eval;
    if ManifestLog::load(&exp.out)?.evaluated(test) && !force {
        return Err(CliError::precondition(format!(
            "{} already scored the test range {test}; pass --force to score it again",
            exp.out.display()
        )));
    }
    let store = SampleStore::new(l.ds.samples.clone());
    let result = final_evaluation(&store, &l.ds.meta.plan, &l.ds.meta.features, &l.cfg, exec)?;
    write_runs(&exp.out, "eval_", &result.runs)?;
    let all: Vec<_> = result.runs.iter().filter_map(|r| r.report.clone()).collect();
    let reports = exp.out.join(REPORT_DIR);
    write(&reports.join("eval_reports.csv"), reports_csv(&all))?;
    write(&reports.join("eval_confusion.csv"), confusion_csv(&all))?;
    write(&reports.join("eval_table.txt"), &result.table)?;
    print!("{}", result.table);
    ManifestLog::append(
        &exp.out,
        RunManifest {
            test_range: Some(test),
            ..experiment_record("eval", args, exp, &l)
        },
    )
}

fn predict(checkpoint: &Path, data: &Path, machine: &str, date: NaiveDate, exec: Exec) -> CliResult<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let (ds, _) = Dataset::load(data)?;
    if ck.features != ds.meta.features {
        return Err(CliError::input(format!(
            "{} was trained with a different feature order than {}",
            checkpoint.display(),
            data.display()
        )));
    }
    let rows = ds
        .machine_rows(machine)
        .ok_or_else(|| CliError::input(format!("machine {machine} is not in {}", data.display())))?;
    let window = ck.arch.window();
    let earliest = rows.earliest_window_end(window).ok_or_else(|| {
        CliError::precondition(format!(
            "{machine} has {} days of data, fewer than the {window}-day window",
            rows.len()
        ))
    })?;
    if date < earliest {
        return Err(CliError::precondition(format!(
            "insufficient history for {machine} on {date}: earliest valid date is {earliest}"
        )));
    }
    let x = rows.window(date, window).ok_or_else(|| {
        let last = rows.last_date().map(|d| d.to_string()).unwrap_or_default();
        CliError::precondition(format!("no data for {machine} on {date}; latest date is {last}"))
    })?;
    let p = ck.predict(&[x], exec)?[0];
    let class = mineroi_core::eval::metrics::argmax(&p);
    let legend: Vec<String> = RoiClass::ALL.iter().map(|c| format!("{}: {}", c.index(), c.legend())).collect();
    println!(
        "{machine} {date} {} class {class} p0 {:.6} p1 {:.6} p2 {:.6} | {}",
        model_name(&ck.arch),
        p[0],
        p[1],
        p[2],
        legend.join("; ")
    );
    Ok(())
}

fn model_name(arch: &Architecture) -> String {
    format!("{}(L={})", arch.kind().display_name(), arch.window())
}
