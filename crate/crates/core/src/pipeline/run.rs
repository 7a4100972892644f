use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{EmbeddingSource, ModelConfig, PipelineConfig};
use super::dataset::load_dataset;
use super::{AtStage, PipelineError};
use crate::embedio::{read_embeddings, EmbeddingMatrix};
use crate::gbdt::{self, BoostLog, GbdtModel, GBDT_MAGIC};
use crate::hpo::{run_study, GbdtObjective, ParamSpec, Params, Study, StudyConfig, TrialContext};
use crate::metrics::{evaluate, threshold_labels, MetricsReport};
use crate::mlphead::{self, LabeledSet, MlpParams, TrainHistory, MLP_MAGIC};
use crate::textprep::{Record, TokenList};

pub const PREDICTIONS_HEADER: &str = "id\tprobability\tlabel";

/// Labels of fully labeled records.
pub fn labels_of(records: &[Record], stage: &str) -> Result<Vec<u8>, PipelineError> {
    records
        .iter()
        .map(|r| {
            r.label
                .ok_or_else(|| PipelineError::data(stage, format!("record {:?} has no label", r.id)))
        })
        .collect()
}

/// Reads the `CLSB` file beside `data` and checks it has `n_rows` rows.
pub fn load_embeddings_for(data: &Path, n_rows: usize) -> Result<EmbeddingMatrix, PipelineError> {
    let path = data.with_extension("clsb");
    let m = read_embeddings(&path)
        .map_err(|e| PipelineError::new(super::Classify::kind(&e), "embed", format!("{}: {e}", path.display())))?;
    if m.n_rows() != n_rows {
        return Err(PipelineError::data(
            "embed",
            format!("{} has {} rows, dataset has {n_rows}", path.display(), m.n_rows()),
        ));
    }
    Ok(m)
}

/// Preprocesses and embeds `records` as configured. `data` locates the
/// sidecar file for file-backed embeddings.
pub fn embed_records(cfg: &PipelineConfig, records: &[Record], data: &Path) -> Result<EmbeddingMatrix, PipelineError> {
    match &cfg.embedding {
        EmbeddingSource::Stub(enc) => {
            let prep = cfg.preprocessor()?;
            let docs: Vec<TokenList> = records.iter().map(|r| prep.tokens(&r.text)).collect();
            enc.encode_corpus(&docs).at("embed")
        }
        EmbeddingSource::File => load_embeddings_for(data, records.len()),
    }
}

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gbdt(GbdtModel),
    Mlp(MlpParams),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Gbdt(m) => m.n_features(),
            Model::Mlp(p) => p.d_in(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Model::Gbdt(m) => gbdt::encode_model(m),
            Model::Mlp(p) => mlphead::encode_head(p),
        }
    }

    /// Decodes either format by its magic bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self, PipelineError> {
        match bytes.get(..4) {
            Some(m) if m == GBDT_MAGIC => gbdt::decode_model(bytes).map(Model::Gbdt).at("model"),
            Some(m) if m == MLP_MAGIC => mlphead::decode_head(bytes).map(Model::Mlp).at("model"),
            Some(m) => Err(PipelineError::data("model", format!("unknown model magic {m:?}"))),
            None => Err(PipelineError::data("model", "model file is shorter than its magic")),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let bytes = fs::read(path).map_err(|e| PipelineError::data("model", format!("{}: {e}", path.display())))?;
        Self::decode(&bytes)
    }

    pub fn predict(&self, x: &EmbeddingMatrix) -> Result<Vec<f64>, PipelineError> {
        if x.dim() != self.n_features() {
            return Err(PipelineError::data(
                "predict",
                format!("model expects {} features, embeddings have {}", self.n_features(), x.dim()),
            ));
        }
        match self {
            Model::Gbdt(m) => m.predict_matrix(x).at("predict"),
            Model::Mlp(p) => x.rows().map(|r| p.forward_f32(r)).collect::<Result<_, _>>().at("predict"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum History {
    Gbdt(BoostLog),
    Mlp(TrainHistory),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: PipelineConfig,
    pub n_train: usize,
    pub n_val: usize,
    pub embedding_dim: usize,
    pub history: History,
    /// Metrics of the saved model on the validation set.
    pub validation: Option<MetricsReport>,
}

fn write_file(path: &Path, bytes: &[u8], stage: &str) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))
}

/// Load, preprocess, embed, train, validate. Writes the model to
/// `model_out` and, if given, the JSON report to `report_out`. Validation
/// metrics come from the model as saved.
pub fn run_train(
    cfg: &PipelineConfig,
    train_path: &Path,
    val_path: Option<&Path>,
    model_out: &Path,
    report_out: Option<&Path>,
) -> Result<TrainReport, PipelineError> {
    cfg.validate()?;
    let train = load_dataset(train_path, cfg.header)?;
    let y = labels_of(&train, "load")?;
    let x = embed_records(cfg, &train, train_path)?;
    let val = match val_path {
        Some(p) => {
            let recs = load_dataset(p, cfg.header)?;
            let vy = labels_of(&recs, "load")?;
            Some((embed_records(cfg, &recs, p)?, vy))
        }
        None => None,
    };

    let (model, history) = match cfg.effective_model() {
        ModelConfig::Gbdt(g) => {
            let valid = val.as_ref().map(|(vx, vy)| (vx, vy.as_slice()));
            let (m, log) = gbdt::train(&x, &y, &g, valid).at("train")?;
            (Model::Gbdt(m), History::Gbdt(log))
        }
        ModelConfig::Mlp(h) => {
            let train_set = LabeledSet::new(&x, &y).at("train")?;
            let val_set = match &val {
                Some((vx, vy)) => Some(LabeledSet::new(vx, vy).at("train")?),
                None => None,
            };
            let (p, hist) = mlphead::train_head(train_set, val_set, &h).at("train")?;
            (Model::Mlp(p), History::Mlp(hist))
        }
    };

    let bytes = model.encode();
    let saved = Model::decode(&bytes)?;
    let validation = match &val {
        Some((vx, vy)) => {
            let probs = saved.predict(vx)?;
            Some(evaluate(vy, &threshold_labels(&probs, cfg.threshold)).at("validate")?)
        }
        None => None,
    };
    write_file(model_out, &bytes, "save")?;

    let report = TrainReport {
        config: cfg.clone(),
        n_train: train.len(),
        n_val: val.as_ref().map_or(0, |(vx, _)| vx.n_rows()),
        embedding_dim: x.dim(),
        history,
        validation,
    };
    if let Some(path) = report_out {
        let mut text = serde_json::to_string_pretty(&report).map_err(|e| PipelineError::data("report", e.to_string()))?;
        text.push('\n');
        write_file(path, text.as_bytes(), "report")?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub probability: f64,
    pub label: u8,
}

pub fn write_predictions(preds: &[Prediction], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from(PREDICTIONS_HEADER);
    out.push('\n');
    for p in preds {
        out.push_str(&format!("{}\t{}\t{}\n", p.id, p.probability, p.label));
    }
    write_file(path, out.as_bytes(), "predict")
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::data("eval", format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == PREDICTIONS_HEADER => {}
        _ => return Err(PipelineError::data("eval", format!("line 1: expected header {PREDICTIONS_HEADER:?}"))),
    }
    lines
        .map(|(i, line)| {
            let bad = |m: &str| PipelineError::data("eval", format!("line {}: {m}", i + 1));
            let cols: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let [id, p, label] = cols.as_slice() else {
                return Err(bad("expected 3 tab-separated columns"));
            };
            let probability: f64 = p.parse().map_err(|_| bad("probability is not a number"))?;
            let label = match *label {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad("label must be 0 or 1")),
            };
            Ok(Prediction {
                id: id.to_string(),
                probability,
                label,
            })
        })
        .collect()
}

/// Scores `records` (rows of `x`, same order) and applies `threshold`.
/// `p > threshold` is labeled 1, so threshold 0 marks everything positive
/// and threshold 1 nothing.
pub fn predict_records(
    model: &Model,
    records: Vec<Record>,
    x: &EmbeddingMatrix,
    threshold: f64,
) -> Result<Vec<Prediction>, PipelineError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PipelineError::config("predict", "threshold must lie in [0, 1]"));
    }
    if x.n_rows() != records.len() {
        return Err(PipelineError::data(
            "predict",
            format!("{} embedding rows for {} records", x.n_rows(), records.len()),
        ));
    }
    let probs = model.predict(x)?;
    let labels = threshold_labels(&probs, threshold);
    Ok(records
        .into_iter()
        .zip(probs.into_iter().zip(labels))
        .map(|(r, (probability, label))| Prediction {
            id: r.id,
            probability,
            label,
        })
        .collect())
}

/// Predicts every record of `data` in input order and writes the TSV.
pub fn run_predict(
    cfg: &PipelineConfig,
    model_path: &Path,
    data: &Path,
    out: &Path,
    threshold: f64,
) -> Result<Vec<Prediction>, PipelineError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(PipelineError::config("predict", "threshold must lie in [0, 1]"));
    }
    let model = Model::load(model_path)?;
    let records = load_dataset(data, cfg.header)?;
    let x = embed_records(cfg, &records, data)?;
    let preds = predict_records(&model, records, &x, threshold)?;
    write_predictions(&preds, out)?;
    Ok(preds)
}

/// Joins predicted labels to gold labels by id and scores them.
pub fn run_eval(predictions: &Path, gold: &Path, gold_header: bool) -> Result<MetricsReport, PipelineError> {
    let preds = read_predictions(predictions)?;
    let mut by_id: HashMap<&str, u8> = HashMap::with_capacity(preds.len());
    for p in &preds {
        if by_id.insert(p.id.as_str(), p.label).is_some() {
            return Err(PipelineError::data("eval", format!("duplicate prediction for id {:?}", p.id)));
        }
    }
    let gold = load_dataset(gold, gold_header)?;
    let truth = labels_of(&gold, "eval")?;
    let pred = gold
        .iter()
        .map(|r| {
            by_id
                .get(r.id.as_str())
                .copied()
                .ok_or_else(|| PipelineError::data("eval", format!("no prediction for id {:?}", r.id)))
        })
        .collect::<Result<Vec<u8>, _>>()?;
    evaluate(&truth, &pred).at("eval")
}

/// Booster tuning on a train/validation pair.
pub struct HpoRequest<'a> {
    pub config: &'a PipelineConfig,
    pub train: &'a Path,
    pub val: &'a Path,
    pub space: Vec<ParamSpec>,
    pub study: StudyConfig,
}

pub fn run_hpo(req: &HpoRequest<'_>) -> Result<Study, PipelineError> {
    req.config.validate()?;
    let ModelConfig::Gbdt(base) = req.config.effective_model() else {
        return Err(PipelineError::config("hpo", "hyperparameter search needs a gbdt model config"));
    };
    let load = |p: &Path| -> Result<(EmbeddingMatrix, Vec<u8>), PipelineError> {
        let recs = load_dataset(p, req.config.header)?;
        let y = labels_of(&recs, "load")?;
        Ok((embed_records(req.config, &recs, p)?, y))
    };
    let (tx, ty) = load(req.train)?;
    let (vx, vy) = load(req.val)?;
    let objective = GbdtObjective {
        base,
        train: (&tx, &ty),
        val: (&vx, &vy),
        threshold: req.config.threshold,
    };
    run_study(&req.space, &req.study, |p: &Params, c: &mut TrialContext<'_>| objective.evaluate(p, c)).at("hpo")
}
