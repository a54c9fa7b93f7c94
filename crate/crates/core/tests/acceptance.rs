//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//! Built with `harness = false` so the lines are printed under `cargo test`.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::Days;
use mineroi_core::dataset::{
    build_samples, build_splits, prepare_split, DataManifest, Dataset, FeatureOrder, SampleStore, WindowConfig,
    WindowSample,
};
use mineroi_core::eval::{
    aggregate_seeds, auc_ovr, confusion_csv, cross_validate, evaluate, metrics, reports_csv, train_final,
    ConfusionMatrix, CvConfig, EvalReport,
};
use mineroi_core::nn::checkpoint::Architecture;
use mineroi_core::nn::gradcheck::check;
use mineroi_core::nn::spectral::SpectralTransform;
use mineroi_core::nn::{Classifier, LstmConfig, LstmNet, MineRoiNet, ModelConfig, Params, SpectralMode};
use mineroi_core::roi::{self, label, MachineSpec, Market, RoiClass, HORIZON_DAYS};
use mineroi_core::synth::{
    default_halvings, generate, naive_auc, naive_confusion, naive_mean_std, naive_rates, oracle_roi,
    separable_dataset, three_regime_plan, write_scenario, ScenarioConfig,
};
use mineroi_core::train::{smoothed_target, train, weighted_ce, AdamW, AdamWConfig, TrainConfig};
use mineroi_core::Exec;
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.1?}, limit {limit:?}"))
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn scenario_samples(seed: u64, window: usize) -> (Vec<MachineSpec>, Market, Vec<WindowSample>) {
    let s = ScenarioConfig::three_regime(seed);
    let (machines, market) = generate(&s).unwrap();
    let cfg = WindowConfig {
        region: s.region.clone(),
        window,
        horizon: HORIZON_DAYS,
        halvings: default_halvings(),
        order: FeatureOrder::default(),
    };
    let samples = build_samples(&machines, &market, &cfg, Exec::default()).unwrap().1;
    (machines, market, samples)
}

fn c1_roi_oracle() -> Check {
    let t = Instant::now();
    let s = ScenarioConfig::three_regime(7);
    let (machines, market) = generate(&s).map_err(e)?;
    let latest = market.last_date().unwrap() - Days::new(u64::from(HORIZON_DAYS));
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let (mut n, mut worst) = (0, 0.0f64);
    while n < 100 {
        let m = &machines[rng.random_range(0..machines.len())];
        let first = *m.prices.keys().next().unwrap();
        if first > latest {
            continue;
        }
        let d = first + Days::new(rng.random_range(0..=(latest - first).num_days() as u64));
        let fast = roi::roi(m, d, HORIZON_DAYS, &market, &s.region).map_err(e)?;
        let slow = oracle_roi(m, d, HORIZON_DAYS, &market, &s.region).map_err(e)?;
        worst = worst.max((fast.roi - slow.roi).abs() / slow.roi.abs().max(1e-300));
        n += 1;
    }
    ensure(worst < 1e-9, || format!("max relative error {worst:.3e}"))?;
    within(t.elapsed(), Duration::from_secs(10))?;
    Ok(format!("100 pairs, max relative error {worst:.2e}"))
}

fn c2_label_boundaries() -> Check {
    let got = [label(0.0).map_err(e)?, label(1.0).map_err(e)?, label(0.5).map_err(e)?];
    let want = [RoiClass::Unprofitable, RoiClass::Profitable, RoiClass::Marginal];
    ensure(got == want, || format!("labels {got:?}"))?;
    ensure(got.map(RoiClass::index) == [0, 2, 1], || "class indices".into())?;
    Ok("label(0)=0, label(1)=2, label(0.5)=1".into())
}

fn c3_dft_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut round, mut ident) = (0.0f64, 0.0f64);
    for l in [30usize, 60] {
        let f = 14;
        let per_bin = SpectralTransform::new(l, SpectralMode::PerBin);
        let literal = SpectralTransform::new(l, SpectralMode::Literal);
        let nb = l / 2 + 1;
        for _ in 0..50 {
            let x = Array2::from_shape_simple_fn((l, f), || rng.random_range(-100.0..100.0));
            let (y, _) = per_bin.forward(x.view(), &vec![1.0; f * nb], &vec![0.0; f * nb]).map_err(e)?;
            round = round.max((&y - &x).iter().fold(0.0, |m, v| m.max(v.abs())));
            let (y, _) = literal.forward(x.view(), &vec![1.0; f], &vec![0.0; f]).map_err(e)?;
            ident = ident.max((&y - &x).iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    ensure(round < 1e-9 && ident < 1e-9, || format!("round trip {round:.2e}, literal {ident:.2e}"))?;
    Ok(format!("L=30,60: round trip {round:.2e}, literal identity {ident:.2e}"))
}

fn perturb_spectral(p: &mut Params, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in ["spectral.re", "spectral.im"] {
        let id = p.layout().find(name).unwrap();
        for v in p.slice_mut(id) {
            *v += rng.random_range(-0.3..0.3);
        }
    }
}

fn worst_group<M: Classifier>(net: &M, seed: u64, dropout: Option<u64>) -> Result<(f64, String, usize), String> {
    let mut p = net.init_seeded(seed);
    perturb_spectral(&mut p, seed + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
    let x = Array2::from_shape_simple_fn((8, 3), || rng.random_range(0.0..1.0));
    let groups = check(net, &p, x.view(), [0.7, -1.1, 0.4], dropout, 1e-5).map_err(e)?;
    let w = groups.iter().max_by(|a, b| a.rel_error.total_cmp(&b.rel_error)).unwrap();
    Ok((w.rel_error, w.name.clone(), groups.len()))
}

fn c4_gradients() -> Check {
    let t = Instant::now();
    let lit = ModelConfig {
        spectral_mode: SpectralMode::Literal,
        ..ModelConfig::tiny()
    };
    let drop = ModelConfig {
        dropout: 0.2,
        ..ModelConfig::tiny()
    };
    let lstm_drop = LstmConfig {
        dropout: 0.3,
        ..LstmConfig::tiny()
    };
    let runs = [
        ("mineroi", worst_group(&MineRoiNet::new(ModelConfig::tiny()).map_err(e)?, 1, None)?),
        ("mineroi literal", worst_group(&MineRoiNet::new(lit).map_err(e)?, 4, None)?),
        ("mineroi dropout", worst_group(&MineRoiNet::new(drop).map_err(e)?, 7, Some(10))?),
        ("lstm", worst_group(&LstmNet::new(LstmConfig::tiny()).map_err(e)?, 11, None)?),
        ("lstm dropout", worst_group(&LstmNet::new(lstm_drop).map_err(e)?, 14, Some(17))?),
    ];
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (label, (rel, name, n)) in &runs {
        ensure(*rel < 1e-4, || format!("{label}: {name} relative error {rel:.2e}"))?;
        worst = worst.max(*rel);
        detail.push(format!("{label} {n} groups"));
    }
    within(t.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{}; max relative error {worst:.2e}", detail.join(", ")))
}

fn c5_loss() -> Check {
    let logits = Array2::<f64>::zeros((4, 3));
    let labels = [RoiClass::Unprofitable, RoiClass::Marginal, RoiClass::Profitable, RoiClass::Marginal];
    let targets = Array2::from_shape_fn((4, 3), |(i, c)| if labels[i].index() == c { 1.0 } else { 0.0 });
    let loss = weighted_ce(logits.view(), targets.view(), &[1.0; 3]).map_err(e)?;
    let ln3 = 3f64.ln();
    ensure((loss - ln3).abs() < 1e-12, || format!("uniform loss {loss} vs ln 3"))?;
    let s = smoothed_target(RoiClass::Profitable, 0.1).map_err(e)?;
    let want = [1.0 / 30.0, 1.0 / 30.0, 28.0 / 30.0];
    let dev = s.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ensure(dev < 1e-12, || format!("smoothed target {s:?}"))?;
    Ok(format!("|loss - ln 3| = {:.1e}, smoothed target deviation {dev:.1e}", (loss - ln3).abs()))
}

fn c6_adamw() -> Check {
    let net = MineRoiNet::new(ModelConfig::tiny()).map_err(e)?;
    let mut p = net.init_seeded(6);
    let zero = Params::zeros(p.layout().clone());
    let (lr, wd) = (1e-3, 0.05);
    let mut opt = AdamW::new(AdamWConfig::new(lr, wd), p.data().len());
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let before = p.data().to_vec();
        opt.step(&mut p, &zero).map_err(e)?;
        for (a, b) in p.data().iter().zip(&before) {
            worst = worst.max((a - b * (1.0 - lr * wd)).abs());
        }
    }
    ensure(worst < 1e-12, || format!("deviation from (1 - lr*wd) shrink {worst:.2e}"))?;
    Ok(format!("10 steps, max deviation {worst:.1e}"))
}

fn c7_leakage() -> Check {
    let s = ScenarioConfig::three_regime(42);
    let (mut machines, mut market) = generate(&s).map_err(e)?;
    let cfg = WindowConfig {
        region: s.region.clone(),
        window: 30,
        horizon: HORIZON_DAYS,
        halvings: default_halvings(),
        order: FeatureOrder::default(),
    };
    let build = |m: &[MachineSpec], k: &Market| build_samples(m, k, &cfg, Exec::default()).unwrap().1;
    let base = build(&machines, &market);
    let target = base[base.len() / 2].clone();
    let di = target.end_date;
    let find = |all: &[WindowSample], x: &WindowSample| {
        all.iter()
            .find(|y| y.machine_id == x.machine_id && y.end_date == x.end_date)
            .cloned()
            .unwrap()
    };

    // Everything after d_i changes, inside and beyond the horizon.
    let mut d = di + Days::new(1);
    while let Some(day) = market.get_mut(d) {
        day.btc_price *= 3.0;
        day.network_revenue *= 5.0;
        day.network_hashrate *= 0.5;
        *day.electricity_rates.get_mut(&s.region).unwrap() *= 2.0;
        d = d + Days::new(1);
    }
    for m in machines.iter_mut() {
        for (_, p) in m.prices.range_mut(di + Days::new(1)..) {
            *p *= 1.5;
        }
    }
    let after = build(&machines, &market);
    let mut same = 0;
    for x in base.iter().filter(|x| x.end_date <= di) {
        ensure(find(&after, x).matrix == x.matrix, || format!("X changed for {} {}", x.machine_id, x.end_date))?;
        same += 1;
    }
    let moved = find(&after, &target);
    ensure(moved.roi != target.roi, || "horizon change did not reach the label".into())?;

    // Only the horizon after d_i changes (d_i itself is also the window's last
    // row): X_i stays, y_i moves.
    let (machines, mut market) = generate(&s).map_err(e)?;
    for k in 1..u64::from(HORIZON_DAYS) {
        market.get_mut(di + Days::new(k)).unwrap().network_revenue = 0.0;
    }
    let zeroed = find(&build(&machines, &market), &target);
    ensure(zeroed.matrix == target.matrix, || "X_i changed with horizon data".into())?;
    ensure(zeroed.roi < target.roi, || "zeroed horizon revenue did not lower the ROI".into())?;

    // Eval rows are scaled with train bounds.
    let split = &three_regime_plan().splits[0];
    let prepared = prepare_split(&SampleStore::new(base.clone()), split).map_err(e)?;
    let mut lo = [f64::INFINITY; 14];
    let mut hi = [f64::NEG_INFINITY; 14];
    for x in base.iter().filter(|x| split.train.contains(x.end_date)) {
        for (j, col) in x.matrix.axis_iter(Axis(1)).enumerate() {
            for &v in col {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
    }
    let mut eval: Vec<&WindowSample> = base.iter().filter(|x| split.eval.contains(x.end_date)).collect();
    eval.sort_by(|a, b| (a.end_date, &a.machine_id).cmp(&(b.end_date, &b.machine_id)));
    for (raw, got) in eval.iter().zip(&prepared.eval) {
        for ((t, j), v) in raw.matrix.indexed_iter() {
            let want = if hi[j] == lo[j] { 0.0 } else { (v - lo[j]) / (hi[j] - lo[j]) };
            ensure(got.x[[t, j]] == want, || format!("eval value at ({t},{j}) not scaled with train bounds"))?;
        }
    }
    Ok(format!(
        "{same} earlier windows unchanged, horizon alters only y, {} eval windows on train bounds",
        eval.len()
    ))
}

fn c8_learnability() -> Check {
    let t = Instant::now();
    let tr = separable_dataset(30, 14, 500, 1);
    let va = separable_dataset(30, 14, 100, 2);
    let net = MineRoiNet::new(ModelConfig::best_30_day()).map_err(e)?;
    let cfg = TrainConfig {
        batch_size: 64,
        max_epochs: 20,
        learning_rate: 1e-4,
        ..TrainConfig::default()
    };
    let out = train(&net, &tr, Some(&va), &cfg, Exec::default()).map_err(e)?;
    let accs: Vec<f64> = out.history.epochs.iter().map(|r| r.val_acc.unwrap()).collect();
    let best = accs.iter().cloned().fold(0.0, f64::max);
    let first = accs.iter().position(|&a| a >= 0.90).map(|i| i + 1);
    let elapsed = t.elapsed();
    ensure(best >= 0.90, || format!("best validation accuracy {best:.3}"))?;
    within(elapsed, Duration::from_secs(300))?;
    Ok(format!(
        "validation accuracy {best:.3} (first >= 0.90 at epoch {}), {elapsed:.0?}",
        first.unwrap()
    ))
}

fn c9_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.random_range(1..300);
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let cm = ConfusionMatrix::from_labels(&truth, &pred).map_err(e)?;
        ensure(cm.counts == naive_confusion(&truth, &pred), || "confusion counts".into())?;
        let m = metrics(&cm).map_err(e)?;
        let (a, p, r, f) = naive_rates(&truth, &pred);
        ensure(m.accuracy == a && m.precision == p && m.recall == r && m.f1 == f, || {
            format!("rates differ for {:?}", cm.counts)
        })?;
    }
    for _ in 0..50 {
        let truth: Vec<usize> = (0..50).map(|i| if i < 3 { i } else { rng.random_range(0..3) }).collect();
        let probs: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                // Scores on a coarse grid so ties occur.
                let v = [0, 1, 2].map(|_| f64::from(rng.random_range(1u8..6)));
                let s: f64 = v.iter().sum();
                v.map(|x| x / s)
            })
            .collect();
        let auc = auc_ovr(&probs, &truth).map_err(e)?;
        for c in 0..3 {
            let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
            let pos: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            let want = naive_auc(&scores, &pos);
            ensure(auc.per_class[c] == Some(want), || format!("class {c} AUC {:?} vs {want}", auc.per_class[c]))?;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let reports: Vec<EvalReport> = (0..5)
            .map(|seed| {
                let truth: Vec<usize> = (0..60).map(|i| i % 3).collect();
                let probs: Vec<[f64; 3]> = (0..60)
                    .map(|_| {
                        let v = [0, 1, 2].map(|_| rng.random_range(0.01..1.0));
                        let s: f64 = v.iter().sum();
                        v.map(|x| x / s)
                    })
                    .collect();
                evaluate("s", seed, &probs, &truth).unwrap()
            })
            .collect();
        let agg = aggregate_seeds(&reports).map_err(e)?;
        type Field<'a> = (&'a dyn Fn(&EvalReport) -> f64, f64, f64);
        let fields: [Field; 3] = [
            (&|r| r.metrics.accuracy, agg.accuracy.mean, agg.accuracy.std),
            (&|r| r.metrics.macro_f1, agg.macro_f1.mean, agg.macro_f1.std),
            (&|r| r.metrics.precision[1], agg.precision[1].mean, agg.precision[1].std),
        ];
        for (f, mean, std) in fields {
            let (m, s) = naive_mean_std(&reports.iter().map(f).collect::<Vec<_>>());
            worst = worst.max((m - mean).abs()).max((s - std).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("aggregation deviation {worst:.2e}"))?;
    Ok(format!("50 confusion fixtures exact, 50 AUC fixtures exact, aggregation within {worst:.1e}"))
}

fn harness_config(window: usize) -> CvConfig {
    CvConfig {
        model: Architecture::MineRoi(ModelConfig {
            window,
            features: 14,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ff: 16,
            dropout: 0.1,
            ..ModelConfig::best_30_day()
        }),
        train: TrainConfig {
            max_epochs: 1,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        seeds: vec![1, 2],
        validation_fraction: 0.1,
    }
}

fn c10_harness() -> Check {
    let plan = three_regime_plan();
    let mut detail = Vec::new();
    for window in [30usize, 60] {
        let store = SampleStore::new(scenario_samples(42, window).2);
        let splits = build_splits(&store, &plan).map_err(e)?;
        let keys = |k: &[mineroi_core::dataset::splits::SampleKey]| -> BTreeSet<(String, chrono::NaiveDate)> {
            k.iter().map(|k| (k.machine_id.clone(), k.end_date)).collect()
        };
        for pair in splits.windows(2) {
            let (a, b) = (keys(&pair[0].train_keys), keys(&pair[1].train_keys));
            ensure(a.is_subset(&b) && a.len() < b.len(), || {
                format!("L={window}: {} train set not nested in {}", pair[0].name, pair[1].name)
            })?;
        }
        for (i, a) in splits.iter().enumerate() {
            let last_train = a.train_keys.iter().map(|k| k.end_date).max().unwrap();
            ensure(a.eval_keys.iter().all(|k| k.end_date > last_train), || format!("{} eval precedes train", a.name))?;
            for b in &splits[i + 1..] {
                ensure(keys(&a.eval_keys).is_disjoint(&keys(&b.eval_keys)), || {
                    format!("L={window}: {} and {} eval sets overlap", a.name, b.name)
                })?;
            }
        }
        let cv = cross_validate(&store, &plan, &harness_config(window), Exec::default()).map_err(e)?;
        let touched = store.served_within(plan.final_split.eval);
        ensure(touched == 0, || format!("L={window}: {touched} test samples read"))?;
        let lines: Vec<&str> = cv.table.lines().collect();
        let mut want = vec![format!("MineROI-Net (L={window})"), "split".to_string()];
        want.extend(plan.splits.iter().map(|s| s.name.clone()));
        want.push("Avg ± Std".into());
        ensure(lines.len() == want.len(), || format!("L={window}: table has {} lines", lines.len()))?;
        for (line, head) in lines.iter().zip(&want) {
            ensure(line.starts_with(head.as_str()), || format!("L={window}: row {line:?} should start {head:?}"))?;
        }
        ensure(lines[2..].iter().all(|l| l.contains('±')), || "rows lack mean ± std".into())?;
        detail.push(format!("L={window}: {} splits, {} runs", splits.len(), cv.runs.len()));
    }
    Ok(format!("{}; nested, disjoint, test range untouched", detail.join(", ")))
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|f| {
            let f = f.unwrap();
            (f.file_name().to_string_lossy().into_owned(), fs::read(f.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

/// Manifest → dataset → checkpoints and reports, all written under `root`.
fn pipeline(root: &Path) -> Result<(), String> {
    let data = root.join("data");
    write_scenario(&data, &ScenarioConfig::three_regime(42), 30, three_regime_plan()).map_err(e)?;
    let manifest = DataManifest::load(&data.join("data.toml")).map_err(e)?;
    let (ds, _) = Dataset::build(&manifest, Exec::default()).map_err(e)?;
    ds.save(&root.join("dataset")).map_err(e)?;
    let (ds, _) = Dataset::load(&root.join("dataset")).map_err(e)?;
    let store = SampleStore::new(ds.samples.clone());
    let cfg = harness_config(30);
    let ckpts = root.join("checkpoints");
    fs::create_dir_all(&ckpts).map_err(e)?;
    for run in train_final(&store, &ds.meta.plan, &ds.meta.features, &cfg, Exec::default()).map_err(e)? {
        run.checkpoint.save(&ckpts.join(format!("seed-{}.ckpt", run.seed))).map_err(e)?;
    }
    let cv = cross_validate(&store, &ds.meta.plan, &cfg, Exec::default()).map_err(e)?;
    let reports = root.join("reports");
    fs::create_dir_all(&reports).map_err(e)?;
    fs::write(reports.join("cv_reports.csv"), reports_csv(&cv.reports())).map_err(e)?;
    fs::write(reports.join("cv_confusion.csv"), confusion_csv(&cv.reports())).map_err(e)?;
    fs::write(reports.join("cv_table.txt"), &cv.table).map_err(e)?;
    Ok(())
}

fn c11_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(e)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a)?;
    pipeline(&b)?;
    let mut files = 0;
    for sub in ["data", "dataset", "checkpoints", "reports"] {
        let (x, y) = (dir_bytes(&a.join(sub)), dir_bytes(&b.join(sub)));
        ensure(x == y, || format!("{sub} differs between runs"))?;
        files += x.len();
    }
    Ok(format!("{files} files byte-identical across two runs"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 11] = [
        ("ROI oracle equivalence", c1_roi_oracle),
        ("label boundaries", c2_label_boundaries),
        ("DFT round-trip", c3_dft_round_trip),
        ("gradient checks", c4_gradients),
        ("loss correctness", c5_loss),
        ("AdamW decoupled decay", c6_adamw),
        ("leakage suite", c7_leakage),
        ("learnability", c8_learnability),
        ("metric oracles", c9_metrics),
        ("harness fidelity", c10_harness),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{:>2}] {name}: {detail} ({:.1?})", i + 1, t.elapsed());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
