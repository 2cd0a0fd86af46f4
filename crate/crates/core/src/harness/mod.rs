//! Population constructors, seeded trial execution, scaling experiments and
//! the lemma-verification sweep.

mod experiment;
mod population;
mod runner;
mod verify;

pub use experiment::{
    log_log_fit, run_batch, run_batch_serial, scaling_study, ExperimentConfig, ScalingRow,
    ScalingStudy,
};
pub use population::{
    build_almost_balanced_population, build_optimal_population, perturb_optimal,
};
pub use runner::{
    run_full, run_last_stage, run_trial, run_trial_traced, AcceptanceCounts, RunMode, RunResult,
    TrialSpec,
};
pub use verify::{
    lemma_suite, one_step_frequencies, predicted_replacement_sets, BoundViolation, HardFailure,
    LemmaSuiteConfig, LemmaSuiteReport, McReport, McRow, OneStepCounts,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("n must be odd (got {n})")]
    EvenProblemSize { n: usize },
    #[error("n must be at least {min} (got {n})")]
    TooSmall { n: usize, min: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("scaling fit needs at least two distinct problem sizes")]
    NeedTwoSizes,
    #[error("all trials truncated at n = {n}; nothing to aggregate")]
    AllTruncated { n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
}
