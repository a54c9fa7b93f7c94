//! From CSV sources to scaled, labeled window samples and split plans.

pub mod bundle;
pub mod features;
pub mod ingest;
pub mod manifest;
pub mod scaler;
pub mod splits;
pub mod windows;

pub use bundle::{Dataset, DatasetMeta};
pub use features::{feature_row, FeatureKind, FeatureOrder, FeatureRow, NUM_FEATURES};
pub use ingest::{ingest, Ingested, SourcePaths};
pub use manifest::DataManifest;
pub use scaler::Scaler;
pub use splits::{
    build_splits, class_weights, prepare_split, prepare_train, DateRange, LabeledWindow, NamedSplit, PreparedSplit, SampleStore,
    SplitPlan,
};
pub use windows::{build_samples, machine_rows, make_windows, MachineRows, WindowConfig, WindowSample};
