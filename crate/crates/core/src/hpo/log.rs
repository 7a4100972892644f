//! Study logs: one JSON object per line, one line per trial, in id order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::space::Params;
use super::study::{Study, Trial, TrialStatus};
use super::HpoError;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    study_seed: u64,
    id: usize,
    params: Params,
    status: TrialStatus,
    checkpoints: Vec<f64>,
    objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn write_log<W: Write>(study: &Study, mut out: W) -> Result<(), HpoError> {
    for t in &study.trials {
        let rec = Record {
            study_seed: study.seed,
            id: t.id,
            params: t.params.clone(),
            status: t.status,
            checkpoints: t.checkpoints.clone(),
            objective: t.objective,
            error: t.error.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| HpoError::Log(e.to_string()))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Rebuilds a study from its log; the best trial is recomputed.
pub fn read_log<R: BufRead>(input: R) -> Result<Study, HpoError> {
    let mut seed = None;
    let mut trials = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| HpoError::Json {
            line: lineno,
            message: e.to_string(),
        })?;
        let bad = |msg: &str| HpoError::Json {
            line: lineno,
            message: msg.to_string(),
        };
        if *seed.get_or_insert(rec.study_seed) != rec.study_seed {
            return Err(bad("study_seed differs from earlier records"));
        }
        if rec.id != trials.len() {
            return Err(bad(&format!("expected trial id {}, found {}", trials.len(), rec.id)));
        }
        if rec.objective.is_some() != (rec.status == TrialStatus::Complete) {
            return Err(bad("objective must be present exactly for complete trials"));
        }
        trials.push(Trial {
            id: rec.id,
            params: rec.params,
            status: rec.status,
            checkpoints: rec.checkpoints,
            objective: rec.objective,
            error: rec.error,
        });
    }
    let seed = seed.ok_or_else(|| HpoError::Log("study log has no trials".into()))?;
    Ok(Study::from_trials(seed, trials))
}

pub fn save_log(study: &Study, path: &Path) -> Result<(), HpoError> {
    write_log(study, BufWriter::new(File::create(path)?))
}

pub fn load_log(path: &Path) -> Result<Study, HpoError> {
    read_log(BufReader::new(File::open(path)?))
}
