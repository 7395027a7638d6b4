//! Batch orchestration: seeded worker pool, dataset generation, reference
//! fuel calibration, policy training, paired evaluation and run manifests.

pub mod dataset;
pub mod evaluation;
pub mod manifest;
pub mod runner;
pub mod training;

pub use dataset::{generate_dataset, split_holdout, uniform_action, DatasetSummary};
pub use evaluation::{paired_evaluation, EvaluationReport, PairRecord};
pub use manifest::{
    fuel_delta_csv, reward_history_csv, tracking_error_csv, ManifestRecord, ManifestWriter, RunInfo, RunManifest,
};
pub use runner::{derive_rng, derive_seed, Runner, SeedDomain};
pub use training::{calibrate_max_fuel, fit_surrogate, percentile, train_policy, FuelCalibration, IterationStats, TRAILING_WINDOW};
