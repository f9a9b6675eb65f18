//! Seeded multi-trial runs, variant comparison and offline macro discovery,
//! with every artifact written to an output directory.

mod compare;
mod config;
mod discover;
mod runner;

pub use compare::{
    check_comparable, format_steps, median_steps, run_compare, steps_to_threshold, summarize,
    Comparison, VariantSummary, DEFAULT_THRESHOLD_FRACTION, NEVER,
};
pub use config::{
    ExperimentConfig, ExperimentSection, DEFAULT_GAP_WINDOW, DEFAULT_TRIALS, OUTPUT_DIR_ENV,
};
pub use discover::{discover, implied_action_count, parse_trace, Discovery};
pub use runner::{
    run_experiment, run_trial, run_trials, trial_dir, write_run, Manifest, RunSummary, TrialArtifacts, TrialEntry,
    TrialStatus,
};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Exit status for a failed command: bad input is a config error, anything
/// else a runtime failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}
