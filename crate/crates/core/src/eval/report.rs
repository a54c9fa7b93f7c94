//! CSV and text renderings of evaluation results.

use std::fmt::Write as _;

use super::metrics::{aggregate_seeds, Aggregate, EvalReport, MeanStd};
use crate::error::Result;

pub const REPORT_HEADER: &str =
    "split,seed,accuracy,macro_f1,prec_0,prec_1,prec_2,rec_0,rec_1,rec_2,f1_0,f1_1,f1_2,auc_0,auc_1,auc_2";

/// One row per report; undefined AUCs are left empty.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut s = format!("{REPORT_HEADER}\n");
    for r in reports {
        let m = &r.metrics;
        let _ = write!(s, "{},{},{},{}", r.split, r.seed, m.accuracy, m.macro_f1);
        for v in m.precision.iter().chain(&m.recall).chain(&m.f1) {
            let _ = write!(s, ",{v}");
        }
        for a in r.auc.per_class {
            let _ = write!(s, ",{}", a.map(|v| v.to_string()).unwrap_or_default());
        }
        s.push('\n');
    }
    s
}

/// Three lines per report: `split,seed,true_class,pred_0,pred_1,pred_2`.
pub fn confusion_csv(reports: &[EvalReport]) -> String {
    let mut s = String::from("split,seed,true_class,pred_0,pred_1,pred_2\n");
    for r in reports {
        for (t, row) in r.confusion.counts.iter().enumerate() {
            let _ = writeln!(s, "{},{},{t},{},{},{}", r.split, r.seed, row[0], row[1], row[2]);
        }
    }
    s
}

fn pm(v: MeanStd) -> String {
    format!("{:.3} ± {:.3}", v.mean, v.std)
}

fn opt_pm(v: Option<MeanStd>) -> String {
    v.map(pm).unwrap_or_else(|| "n/a".into())
}

/// Per-split accuracy and macro F1 (mean ± std over seeds when there are
/// several) followed by an `Avg ± Std` row across splits.
pub fn cv_table(model: &str, reports: &[EvalReport]) -> Result<String> {
    let mut splits: Vec<&str> = Vec::new();
    for r in reports {
        if !splits.contains(&r.split.as_str()) {
            splits.push(&r.split);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "{model}");
    let _ = writeln!(s, "{:<12} {:>17} {:>17}", "split", "accuracy", "macro_f1");
    let (mut accs, mut f1s) = (Vec::new(), Vec::new());
    for name in &splits {
        let rs: Vec<EvalReport> = reports.iter().filter(|r| r.split == *name).cloned().collect();
        let (acc, f1) = if rs.len() >= 2 {
            let a = aggregate_seeds(&rs)?;
            (a.accuracy, a.macro_f1)
        } else {
            let m = &rs[0].metrics;
            (
                MeanStd {
                    mean: m.accuracy,
                    std: 0.0,
                },
                MeanStd {
                    mean: m.macro_f1,
                    std: 0.0,
                },
            )
        };
        accs.push(acc.mean);
        f1s.push(f1.mean);
        let cell = |v: MeanStd| if rs.len() >= 2 { pm(v) } else { format!("{:.3}", v.mean) };
        let _ = writeln!(s, "{:<12} {:>17} {:>17}", name, cell(acc), cell(f1));
    }
    let summary = |v: &[f64]| {
        if v.len() >= 2 {
            MeanStd::of(v).map(pm)
        } else {
            Ok(format!("{:.3} ± 0.000", v[0]))
        }
    };
    let _ = writeln!(s, "{:<12} {:>17} {:>17}", "Avg ± Std", summary(&accs)?, summary(&f1s)?);
    Ok(s)
}

/// Test-set summary over seeds: headline metrics then per-class rows.
pub fn aggregate_table(model: &str, agg: &Aggregate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{model} ({} runs)", agg.runs);
    let _ = writeln!(s, "{:<16} {}", "accuracy", pm(agg.accuracy));
    let _ = writeln!(s, "{:<16} {}", "macro_precision", pm(agg.macro_precision));
    let _ = writeln!(s, "{:<16} {}", "macro_recall", pm(agg.macro_recall));
    let _ = writeln!(s, "{:<16} {}", "macro_f1", pm(agg.macro_f1));
    let _ = writeln!(s, "{:<16} {}", "macro_auc", opt_pm(agg.macro_auc));
    let _ = writeln!(
        s,
        "{:<6} {:>15} {:>15} {:>15} {:>15}",
        "class", "precision", "recall", "f1", "auc"
    );
    for c in 0..3 {
        let _ = writeln!(
            s,
            "{:<6} {:>15} {:>15} {:>15} {:>15}",
            c,
            pm(agg.precision[c]),
            pm(agg.recall[c]),
            pm(agg.f1[c]),
            opt_pm(agg.auc[c])
        );
    }
    s
}

/// Single-run version of [`aggregate_table`].
pub fn single_table(model: &str, r: &EvalReport) -> String {
    let m = &r.metrics;
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
    let mut s = String::new();
    let _ = writeln!(s, "{model} (seed {})", r.seed);
    let _ = writeln!(s, "{:<16} {:.3}", "accuracy", m.accuracy);
    let _ = writeln!(s, "{:<16} {:.3}", "macro_f1", m.macro_f1);
    let _ = writeln!(s, "{:<16} {}", "macro_auc", f(r.auc.macro_auc));
    let _ = writeln!(s, "{:<6} {:>9} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1", "auc");
    for c in 0..3 {
        let _ = writeln!(
            s,
            "{:<6} {:>9.3} {:>9.3} {:>9.3} {:>9}",
            c,
            m.precision[c],
            m.recall[c],
            m.f1[c],
            f(r.auc.per_class[c])
        );
    }
    s
}
