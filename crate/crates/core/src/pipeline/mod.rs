//! End-to-end orchestration: dataset files, preprocessing, embedding,
//! training, prediction, evaluation and the synthetic corpus.

mod config;
mod dataset;
mod run;
mod synth;

pub use config::{EmbeddingSource, ModelConfig, PipelineConfig};
pub use dataset::{format_dataset, load_dataset, parse_dataset, write_dataset};
pub use run::{
    embed_records, labels_of, load_embeddings_for, predict_records, read_predictions, run_eval,
    run_hpo, run_predict, run_train, write_predictions, History, HpoRequest, Model, Prediction, TrainReport,
    PREDICTIONS_HEADER,
};
pub use synth::{make_synthetic, pseudo_words, SyntheticCorpus, SyntheticSpec};

use std::fmt;

use serde::Serialize;

use crate::embedio::EmbedError;
use crate::gbdt::GbdtError;
use crate::hpo::HpoError;
use crate::metrics::MetricsError;
use crate::mlphead::MlpError;
use crate::textprep::TextPrepError;

/// Failure class; decides the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    /// Bad flags or config (exit 2).
    Usage,
    /// Unreadable, malformed or inconsistent input (exit 3).
    Data,
    /// Non-finite values or divergence (exit 4).
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineError {
    pub kind: ErrorKind,
    /// Stage that failed, e.g. "load", "embed", "train".
    pub stage: String,
    pub message: String,
}

impl PipelineError {
    pub fn new(kind: ErrorKind, stage: &str, message: impl Into<String>) -> Self {
        Self {
            kind,
            stage: stage.to_string(),
            message: message.into(),
        }
    }

    pub fn config(stage: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, stage, message)
    }

    pub fn data(stage: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, stage, message)
    }

    /// `{"error":{"kind":…,"stage":…,"message":…}}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

/// Maps a module error to its failure class.
pub trait Classify: fmt::Display {
    fn kind(&self) -> ErrorKind;
}

impl Classify for TextPrepError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for EmbedError {
    fn kind(&self) -> ErrorKind {
        match self {
            EmbedError::NonFinite { .. } => ErrorKind::Numeric,
            EmbedError::ZeroDim => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for GbdtError {
    fn kind(&self) -> ErrorKind {
        match self {
            GbdtError::Config(_) => ErrorKind::Usage,
            GbdtError::NonFinite { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for MlpError {
    fn kind(&self) -> ErrorKind {
        match self {
            MlpError::Config(_) => ErrorKind::Usage,
            MlpError::Diverged { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for HpoError {
    fn kind(&self) -> ErrorKind {
        match self {
            HpoError::NoTrials | HpoError::BadSpec(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }
}

impl Classify for MetricsError {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

impl Classify for std::io::Error {
    fn kind(&self) -> ErrorKind {
        ErrorKind::Data
    }
}

/// Attaches a stage name to a module error.
pub trait AtStage<T> {
    fn at(self, stage: &str) -> Result<T, PipelineError>;
}

impl<T, E: Classify> AtStage<T> for Result<T, E> {
    fn at(self, stage: &str) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(e.kind(), stage, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(ErrorKind::Usage.exit_code(), 2);
        assert_eq!(ErrorKind::Data.exit_code(), 3);
        assert_eq!(ErrorKind::Numeric.exit_code(), 4);
    }

    #[test]
    fn json_shape() {
        let e = PipelineError::data("load", "line 3: bad label \"2\"");
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "data");
        assert_eq!(v["error"]["stage"], "load");
        assert_eq!(v["error"]["message"], "line 3: bad label \"2\"");
    }

    #[test]
    fn classification() {
        let r: Result<(), GbdtError> = Err(GbdtError::NonFinite { iteration: 3 });
        assert_eq!(r.at("train").unwrap_err().kind, ErrorKind::Numeric);
        let r: Result<(), MlpError> = Err(MlpError::Config("x".into()));
        assert_eq!(r.at("train").unwrap_err().kind, ErrorKind::Usage);
    }
}
