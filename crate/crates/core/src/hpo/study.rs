use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::space::{sample, validate_space, ParamSpec, Params};
use super::HpoError;

/// Completed trials needed before median pruning can fire.
pub const MIN_COMPLETED_FOR_PRUNING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Complete,
    Pruned,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: usize,
    pub params: Params,
    pub status: TrialStatus,
    /// Intermediate values reported by the objective, higher is better.
    pub checkpoints: Vec<f64>,
    /// Final value; present iff the trial completed.
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub seed: u64,
    pub trials: Vec<Trial>,
    pub best_trial: Option<usize>,
}

impl Study {
    /// Builds a study and picks the best completed trial, earliest on ties.
    pub fn from_trials(seed: u64, trials: Vec<Trial>) -> Self {
        let mut best: Option<(usize, f64)> = None;
        for t in &trials {
            if let (TrialStatus::Complete, Some(v)) = (t.status, t.objective) {
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((t.id, v));
                }
            }
        }
        Self {
            seed,
            trials,
            best_trial: best.map(|(id, _)| id),
        }
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best_trial.map(|id| &self.trials[id])
    }

    pub fn count(&self, status: TrialStatus) -> usize {
        self.trials.iter().filter(|t| t.status == status).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Pruning {
    #[default]
    Off,
    /// Prune when a checkpoint falls below the median of earlier completed
    /// trials at the same checkpoint. The first `warmup` checkpoints are
    /// never judged.
    Median { warmup: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub n_trials: usize,
    pub seed: u64,
    pub pruning: Pruning,
    pub workers: usize,
}

impl StudyConfig {
    pub fn new(n_trials: usize, seed: u64) -> Self {
        Self {
            n_trials,
            seed,
            pruning: Pruning::Off,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialError {
    Pruned,
    Failed(String),
}

struct Shared {
    slots: Mutex<Vec<Option<Trial>>>,
    done: Condvar,
}

/// Handle passed to the objective for reporting intermediate values.
pub struct TrialContext<'a> {
    id: usize,
    pruning: Pruning,
    checkpoints: Vec<f64>,
    shared: Option<&'a Shared>,
}

impl TrialContext<'_> {
    /// Context outside any study; `report` never prunes.
    pub fn detached(id: usize) -> TrialContext<'static> {
        TrialContext {
            id,
            pruning: Pruning::Off,
            checkpoints: Vec::new(),
            shared: None,
        }
    }

    pub fn trial_id(&self) -> usize {
        self.id
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.checkpoints
    }

    /// Records the next checkpoint. Returns `Err(Pruned)` when the trial
    /// should stop. Blocks until every trial with a smaller id has finished,
    /// so decisions do not depend on scheduling.
    pub fn report(&mut self, value: f64) -> Result<(), TrialError> {
        if !value.is_finite() {
            return Err(TrialError::Failed(format!("non-finite checkpoint {value}")));
        }
        self.checkpoints.push(value);
        let step = self.checkpoints.len() - 1;
        let (Pruning::Median { warmup }, Some(shared)) = (self.pruning, self.shared) else {
            return Ok(());
        };
        if step < warmup {
            return Ok(());
        }
        let mut slots = shared.slots.lock().unwrap();
        while slots[..self.id].iter().any(Option::is_none) {
            slots = shared.done.wait(slots).unwrap();
        }
        let completed: Vec<&Trial> = slots[..self.id]
            .iter()
            .flatten()
            .filter(|t| t.status == TrialStatus::Complete)
            .collect();
        if completed.len() < MIN_COMPLETED_FOR_PRUNING {
            return Ok(());
        }
        let mut at_step: Vec<f64> = completed
            .iter()
            .filter_map(|t| t.checkpoints.get(step).copied())
            .collect();
        match median(&mut at_step) {
            Some(m) if value < m => Err(TrialError::Pruned),
            _ => Ok(()),
        }
    }
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Per-trial sampler: ChaCha8 seeded with the study seed, on stream `id`.
pub fn trial_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "objective panicked".to_string()
    }
}

fn run_trial<F>(id: usize, space: &[ParamSpec], config: &StudyConfig, shared: &Shared, objective: &F) -> Trial
where
    F: Fn(&Params, &mut TrialContext<'_>) -> Result<f64, TrialError>,
{
    let params = sample(space, &mut trial_rng(config.seed, id));
    let mut ctx = TrialContext {
        id,
        pruning: config.pruning,
        checkpoints: Vec::new(),
        shared: Some(shared),
    };
    let result = catch_unwind(AssertUnwindSafe(|| objective(&params, &mut ctx)))
        .unwrap_or_else(|p| Err(TrialError::Failed(panic_message(p))));
    let (status, objective, error) = match result {
        Ok(v) if v.is_finite() => (TrialStatus::Complete, Some(v), None),
        Ok(v) => (TrialStatus::Failed, None, Some(format!("non-finite objective {v}"))),
        Err(TrialError::Pruned) => (TrialStatus::Pruned, None, None),
        Err(TrialError::Failed(msg)) => (TrialStatus::Failed, None, Some(msg)),
    };
    Trial {
        id,
        params,
        status,
        checkpoints: ctx.checkpoints,
        objective,
        error,
    }
}

/// Random search over `space`, maximizing `objective`.
///
/// Trial `i` samples from [`trial_rng`]`(seed, i)` and pruning only looks at
/// trials with smaller ids, so the study is identical for any worker count
/// given a deterministic objective. Objective errors and panics mark the
/// trial failed and the study continues.
pub fn run_study<F>(space: &[ParamSpec], config: &StudyConfig, objective: F) -> Result<Study, HpoError>
where
    F: Fn(&Params, &mut TrialContext<'_>) -> Result<f64, TrialError> + Sync,
{
    if config.n_trials == 0 {
        return Err(HpoError::NoTrials);
    }
    validate_space(space)?;
    let shared = Shared {
        slots: Mutex::new(vec![None; config.n_trials]),
        done: Condvar::new(),
    };
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let id = next.fetch_add(1, Ordering::SeqCst);
        if id >= config.n_trials {
            break;
        }
        let trial = run_trial(id, space, config, &shared, &objective);
        shared.slots.lock().unwrap()[id] = Some(trial);
        shared.done.notify_all();
    };
    let workers = config.workers.clamp(1, config.n_trials);
    if workers == 1 {
        worker();
    } else {
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(worker);
            }
        });
    }
    let trials = shared
        .slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|t| t.expect("every trial slot is filled"))
        .collect();
    Ok(Study::from_trials(config.seed, trials))
}
