//! Seeded random search with optional median pruning.
//!
//! Each trial draws its parameters from a ChaCha8 stream keyed by the study
//! seed and the trial id, and pruning decisions only consult trials with
//! smaller ids. Results are therefore the same for any worker count.

mod log;
mod objective;
mod space;
mod study;

pub use log::{load_log, read_log, save_log, write_log};
pub use objective::{apply_params, GbdtObjective, CHECKPOINT_EVERY};
pub use space::{default_gbdt_space, sample, validate_space, ParamKind, ParamSpec, ParamValue, Params, Scale};
pub use study::{
    run_study, trial_rng, Pruning, Study, StudyConfig, Trial, TrialContext, TrialError, TrialStatus,
    MIN_COMPLETED_FOR_PRUNING,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HpoError {
    #[error("a study needs at least one trial")]
    NoTrials,
    #[error("invalid search space: {0}")]
    BadSpec(String),
    #[error("study log line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("study log: {0}")]
    Log(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
