//! Benchmark harness: configs, paired repetitions, aggregate tables and files.

mod config;
mod experiment;
mod output;

pub use config::{
    parse_threshold_list, profile, ExperimentConfig, RawConfig, ThresholdValue, DEFAULT_OUT_DIR,
    OUT_DIR_ENV, PROFILE_NAMES, REQUIRED_KEYS,
};
pub use experiment::{
    quantile_sorted, run_experiment, AggregateTable, ExperimentResult, KlRow, PosteriorRow,
    Repetition, ScalarRow, Spread,
};
pub use output::{
    write_outputs, ACCEPTANCE_FILE, CONFIG_FILE, CUMULATIVE_FILE, DETERMINISTIC_FILES, KL_FILE,
    POSTERIOR_FILE, RUNS_FILE, TIMINGS_FILE,
};
