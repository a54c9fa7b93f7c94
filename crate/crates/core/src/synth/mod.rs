//! Synthetic markets, planted-structure datasets and brute-force oracles.

pub mod oracle;
pub mod scenario;
pub mod separable;

pub use oracle::{naive_auc, naive_confusion, naive_dft, naive_idft, naive_mean_std, naive_rates, naive_spectral, oracle_roi};
pub use scenario::{default_halvings, generate, three_regime_plan, write_scenario, Regime, ScenarioConfig, SCENARIO_FILES};
pub use separable::{class_mean, nearest_mean_accuracy, separable_bundle, separable_dataset};
