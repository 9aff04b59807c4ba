//! Experiment configuration, the end-to-end runner and cross-run comparison.
//!
//! A run prepares both domains once, then trains and evaluates every
//! (method, seed) pair in isolation. Target RUL labels are stripped before
//! training and only used to score predictions. The manifest records the
//! full configuration and hashes of the config and the prepared data, so a
//! run can be repeated exactly.

mod compare;
mod config;
mod run;

pub use compare::{aggregate, compare_runs, write_comparison_csv, ComparisonRow};
pub use config::{
    fleet_seed, method_defaults, DataConfig, EvalConfig, ExperimentConfig, Task, TrainOverrides, DESK_WINDOW_STRIDE,
};
pub use run::{
    config_hash, embed_windows, hash_window_sets, load_raw, prepare_data, rerun_from_manifest, run_dir, run_experiment,
    run_prepared, run_seed, summarize_embeddings, write_seed_outputs, EmbeddingSet, EmbeddingSummary,
    ExperimentOutcome, Manifest, PreparedData, SeedRun, MANIFEST_FILE, METRICS_FILE, SUMMARY_FILE,
};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "PHASEALIGN_OUTPUT_ROOT";
