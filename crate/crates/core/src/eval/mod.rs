//! Metrics, seed aggregation and the expanding-window harness.

pub mod cv;
pub mod metrics;
pub mod report;

pub use cv::{
    cross_validate, final_evaluation, holdout_tail, score, train_final, CvConfig, CvResult, CvRun, FinalResult, FinalRun,
};
pub use metrics::{aggregate_seeds, auc_ovr, evaluate, metrics, Aggregate, Auc, ConfusionMatrix, EvalReport, MeanStd, Metrics};
pub use report::{aggregate_table, confusion_csv, cv_table, reports_csv, single_table};
