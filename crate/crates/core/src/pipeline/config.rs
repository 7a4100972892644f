use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{AtStage, PipelineError};
use crate::embedio::StubEncoder;
use crate::gbdt::GbdtConfig;
use crate::mlphead::HeadConfig;
use crate::textprep::{Preprocessor, Stoplist};

/// Where feature vectors come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Hash-based stand-in encoder applied to the preprocessed tokens.
    Stub(StubEncoder),
    /// Precomputed `CLSB` file beside each dataset, same stem with a
    /// `.clsb` extension, rows in dataset order.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Gbdt(GbdtConfig),
    Mlp(HeadConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        match self {
            ModelConfig::Gbdt(c) => c.validate().at("config"),
            ModelConfig::Mlp(c) => c.validate().at("config"),
        }
    }

    /// Copy with the model seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            ModelConfig::Gbdt(c) => ModelConfig::Gbdt(GbdtConfig { seed, ..c.clone() }),
            ModelConfig::Mlp(c) => ModelConfig::Mlp(HeadConfig { seed, ..c.clone() }),
        }
    }
}

fn yes() -> bool {
    true
}

fn half() -> f64 {
    0.5
}

/// One JSON document describing a full run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "yes")]
    pub clean: bool,
    #[serde(default = "yes")]
    pub stopwords: bool,
    /// Custom stoplist file; the built-in English list otherwise.
    #[serde(default)]
    pub stoplist: Option<PathBuf>,
    pub embedding: EmbeddingSource,
    pub model: ModelConfig,
    /// Decision threshold for labels and reported metrics; `p > threshold`
    /// is positive.
    #[serde(default = "half")]
    pub threshold: f64,
    /// Model seed; replaces any seed inside `model`.
    #[serde(default)]
    pub seed: u64,
    /// Dataset files start with a header line.
    #[serde(default)]
    pub header: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            clean: true,
            stopwords: true,
            stoplist: None,
            embedding: EmbeddingSource::Stub(StubEncoder::new(256, 0)),
            model: ModelConfig::Gbdt(GbdtConfig::default()),
            threshold: 0.5,
            seed: 0,
            header: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(PipelineError::config("config", "threshold must lie in (0, 1)"));
        }
        if let EmbeddingSource::Stub(s) = &self.embedding {
            if s.dim == 0 || s.layers == 0 {
                return Err(PipelineError::config("config", "stub dim and layers must be >= 1"));
            }
        }
        if self.stoplist.is_some() && !self.stopwords {
            return Err(PipelineError::config("config", "stoplist given but stopwords is off"));
        }
        self.model.validate()
    }

    pub fn preprocessor(&self) -> Result<Preprocessor, PipelineError> {
        let stoplist = match (&self.stopwords, &self.stoplist) {
            (false, _) => None,
            (true, None) => Some(Stoplist::english()),
            (true, Some(path)) => Some(Stoplist::from_file(path).at("prep")?),
        };
        Ok(Preprocessor {
            clean: self.clean,
            stoplist,
        })
    }

    /// Model config with the pipeline seed and threshold applied.
    pub fn effective_model(&self) -> ModelConfig {
        match self.model.with_seed(self.seed) {
            ModelConfig::Mlp(c) => ModelConfig::Mlp(HeadConfig {
                threshold: self.threshold,
                ..c
            }),
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedio::Pooling;

    #[test]
    fn parses_full_document() {
        let cfg = PipelineConfig::from_json(
            r#"{"clean": false, "stopwords": true,
                "embedding": {"source": "stub", "dim": 64, "seed": 3, "layers": 2, "pooling": "mean"},
                "model": {"kind": "mlp", "hidden_dim": 8, "epochs": 2},
                "threshold": 0.4, "seed": 9}"#,
        )
        .unwrap();
        assert!(!cfg.clean);
        assert_eq!(
            cfg.embedding,
            EmbeddingSource::Stub(StubEncoder {
                dim: 64,
                seed: 3,
                layers: 2,
                pooling: Pooling::Mean
            })
        );
        match cfg.effective_model() {
            ModelConfig::Mlp(h) => {
                assert_eq!((h.hidden_dim, h.epochs, h.seed, h.threshold), (8, 2, 9, 0.4));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = PipelineConfig::from_json(r#"{"embedding": {"source": "file"}, "model": {"kind": "gbdt"}}"#).unwrap();
        assert!(cfg.clean && cfg.stopwords && !cfg.header);
        assert_eq!(cfg.threshold, 0.5);
        assert_eq!(cfg.model, ModelConfig::Gbdt(GbdtConfig::default()));
        assert_eq!(cfg.embedding, EmbeddingSource::File);
    }

    #[test]
    fn rejects_unknown_keys_everywhere() {
        for doc in [
            r#"{"embedding": {"source": "file"}, "model": {"kind": "gbdt"}, "extra": 1}"#,
            r#"{"embedding": {"source": "stub", "dim": 8, "seed": 0, "size": 2}, "model": {"kind": "gbdt"}}"#,
            r#"{"embedding": {"source": "file"}, "model": {"kind": "gbdt", "depth": 3}}"#,
            r#"{"embedding": {"source": "file"}, "model": {"kind": "svm"}}"#,
            r#"{"model": {"kind": "gbdt"}}"#,
        ] {
            let e = PipelineConfig::from_json(doc).unwrap_err();
            assert_eq!(e.kind, super::super::ErrorKind::Usage, "{doc}");
        }
    }

    #[test]
    fn threshold_must_be_interior() {
        for t in ["0", "1", "1.5"] {
            let doc = format!(r#"{{"embedding": {{"source": "file"}}, "model": {{"kind": "gbdt"}}, "threshold": {t}}}"#);
            assert!(PipelineConfig::from_json(&doc).is_err(), "{t}");
        }
    }

    #[test]
    fn invalid_model_values() {
        let doc = r#"{"embedding": {"source": "file"}, "model": {"kind": "gbdt", "num_leaves": 1}}"#;
        assert!(PipelineConfig::from_json(doc).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_json(&text).unwrap(), cfg);
    }
}
