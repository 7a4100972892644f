use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::{accumulate_gradient, MlpError, MlpParams};
use crate::embedio::EmbeddingMatrix;
use crate::metrics::{evaluate, threshold_labels};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    /// Decision threshold used for validation F1.
    pub threshold: f64,
    /// Z-score inputs with training statistics during training; the affine
    /// map is folded into the first layer afterwards.
    pub standardize: bool,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 256,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            adam: AdamConfig::default(),
            threshold: 0.5,
            standardize: false,
        }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        if self.hidden_dim == 0 {
            return Err(MlpError::Config("hidden_dim must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(MlpError::Config("batch_size must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(MlpError::Config("threshold must lie in (0, 1)".into()));
        }
        self.adam.validate()
    }
}

/// Feature rows with one 0/1 label per row.
#[derive(Debug, Clone, Copy)]
pub struct LabeledSet<'a> {
    pub x: &'a EmbeddingMatrix,
    pub y: &'a [u8],
}

impl<'a> LabeledSet<'a> {
    pub fn new(x: &'a EmbeddingMatrix, y: &'a [u8]) -> Result<Self, MlpError> {
        if x.n_rows() != y.len() {
            return Err(MlpError::LabelCount {
                rows: x.n_rows(),
                labels: y.len(),
            });
        }
        if let Some(row) = y.iter().position(|&v| v > 1) {
            return Err(MlpError::BadLabel { row, value: y[row] });
        }
        Ok(Self { x, y })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &EmbeddingMatrix) -> Self {
        let n = x.n_rows() as f64;
        let d = x.dim();
        let mut mean = vec![0.0; d];
        for row in x.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x.rows() {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, row: &[f32]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect()
    }
}

fn to_f64_rows(x: &EmbeddingMatrix, std: Option<&Standardizer>) -> Vec<Vec<f64>> {
    x.rows()
        .map(|r| match std {
            Some(s) => s.apply(r),
            None => r.iter().map(|&v| v as f64).collect(),
        })
        .collect()
}

fn f1_at(params: &MlpParams, rows: &[Vec<f64>], y: &[u8], threshold: f64) -> Result<f64, MlpError> {
    let probs = rows
        .iter()
        .map(|r| params.forward(r))
        .collect::<Result<Vec<_>, _>>()?;
    let pred = threshold_labels(&probs, threshold);
    Ok(evaluate(y, &pred).map(|r| r.f1).unwrap_or(0.0))
}

/// Mini-batch Adam on mean BCE. Initialization and per-epoch shuffling both
/// draw from one ChaCha8 stream seeded with `config.seed`. With a validation
/// set, the parameters of the epoch with the best validation F1 are returned
/// (earliest epoch on ties); otherwise the final parameters.
pub fn train_head(
    train: LabeledSet<'_>,
    val: Option<LabeledSet<'_>>,
    config: &HeadConfig,
) -> Result<(MlpParams, TrainHistory), MlpError> {
    config.validate()?;
    if train.x.is_empty() {
        return Err(MlpError::EmptyTrain);
    }
    let d_in = train.x.dim();
    if let Some(v) = &val {
        if v.x.dim() != d_in {
            return Err(MlpError::ShapeMismatch {
                expected: d_in,
                got: v.x.dim(),
            });
        }
    }

    let standardizer = config.standardize.then(|| Standardizer::fit(train.x));
    let finish = |p: MlpParams| match &standardizer {
        Some(s) => p.fold_input_affine(&s.mean, &s.scale),
        None => p,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = MlpParams::init_he(d_in, config.hidden_dim, &mut rng);
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((finish(params), history));
    }

    let xs = to_f64_rows(train.x, standardizer.as_ref());
    let val_rows = val.map(|v| (to_f64_rows(v.x, standardizer.as_ref()), v.y));
    let mut state = AdamState::new(&params, config.adam);
    let mut grad = MlpParams::zeros(d_in, config.hidden_dim);
    let mut scratch = vec![0.0; config.hidden_dim];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut best: Option<(f64, usize, MlpParams)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], f64)> = chunk
                .iter()
                .map(|&i| (xs[i].as_slice(), train.y[i] as f64))
                .collect();
            for s in grad.slices_mut() {
                s.fill(0.0);
            }
            loss_sum += accumulate_gradient(&params, &batch, &mut grad, &mut scratch)?;
            adam_step(&mut params, &grad, &mut state)?;
        }
        let train_loss = loss_sum / xs.len() as f64;
        if !train_loss.is_finite() || !params.is_finite() {
            return Err(MlpError::Diverged { epoch });
        }
        let val_f1 = match &val_rows {
            Some((rows, y)) => Some(f1_at(&params, rows, y, config.threshold)?),
            None => None,
        };
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
        });
        if let Some(f) = val_f1 {
            if best.as_ref().is_none_or(|(b, _, _)| f > *b) {
                best = Some((f, epoch, params.clone()));
            }
        }
    }

    let (out, best_epoch) = match best {
        Some((_, epoch, p)) => (p, epoch),
        None => (params, config.epochs - 1),
    };
    history.best_epoch = Some(best_epoch);
    Ok((finish(out), history))
}
