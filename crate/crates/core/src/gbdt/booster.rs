use std::ops::ControlFlow;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bins::{BinMapper, BinnedMatrix};
use super::config::GbdtConfig;
use super::tree::{grow_tree, GrowConfig, Tree};
use super::{logistic_grad_hess, GbdtError};
use crate::embedio::EmbeddingMatrix;
use crate::mlphead::{bce_loss, sigmoid};

/// Base scores are clamped to `±ln(PRIOR_ODDS_CAP)`.
pub const PRIOR_ODDS_CAP: f64 = 1e6;

/// Trained ensemble. Leaf values already include the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub config: GbdtConfig,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub mapper: BinMapper,
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.mapper.n_features()
    }

    pub fn raw_score(&self, x: &[f32]) -> Result<f64, GbdtError> {
        if x.len() != self.n_features() {
            return Err(GbdtError::DimMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self
            .trees
            .iter()
            .fold(self.base_score, |s, t| s + t.predict_raw(&self.mapper, x)))
    }

    pub fn predict_proba(&self, x: &[f32]) -> Result<f64, GbdtError> {
        self.raw_score(x).map(sigmoid)
    }

    pub fn predict_matrix(&self, x: &EmbeddingMatrix) -> Result<Vec<f64>, GbdtError> {
        x.rows().map(|r| self.predict_proba(r)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoostLog {
    /// Mean training log-loss after each iteration.
    pub train_loss: Vec<f64>,
    /// Mean validation log-loss after each iteration, when a validation set
    /// was supplied.
    pub val_loss: Vec<f64>,
    /// Number of trees kept in the model.
    pub n_trees: usize,
    pub early_stopped: bool,
    /// The per-iteration monitor asked to stop.
    pub interrupted: bool,
}

/// Samples `round(n * fraction)` (at least 1) indices, sorted ascending.
fn subsample(rng: &mut ChaCha8Rng, n: usize, fraction: f64) -> Vec<usize> {
    if fraction >= 1.0 {
        return (0..n).collect();
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn check_labels(x: &EmbeddingMatrix, y: &[u8]) -> Result<(), GbdtError> {
    if x.n_rows() != y.len() {
        return Err(GbdtError::LabelCount {
            rows: x.n_rows(),
            labels: y.len(),
        });
    }
    if let Some(row) = y.iter().position(|&v| v > 1) {
        return Err(GbdtError::BadLabel { row, value: y[row] });
    }
    Ok(())
}

fn mean_logloss(scores: &[f64], y: &[u8]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores
        .iter()
        .zip(y)
        .map(|(&s, &t)| bce_loss(sigmoid(s), t as f64))
        .sum::<f64>()
        / scores.len() as f64
}

pub fn train(
    x: &EmbeddingMatrix,
    y: &[u8],
    config: &GbdtConfig,
    valid: Option<(&EmbeddingMatrix, &[u8])>,
) -> Result<(GbdtModel, BoostLog), GbdtError> {
    train_with_monitor(x, y, config, valid, |_, _| ControlFlow::Continue(()))
}

/// Boosting with a per-iteration `monitor(iteration, val_loss)`. Breaking
/// stops training and keeps the trees grown so far. Without a validation set
/// the monitor is never called.
pub fn train_with_monitor<M>(
    x: &EmbeddingMatrix,
    y: &[u8],
    config: &GbdtConfig,
    valid: Option<(&EmbeddingMatrix, &[u8])>,
    mut monitor: M,
) -> Result<(GbdtModel, BoostLog), GbdtError>
where
    M: FnMut(usize, f64) -> ControlFlow<()>,
{
    config.validate()?;
    if x.is_empty() {
        return Err(GbdtError::EmptyData);
    }
    check_labels(x, y)?;
    if let Some((vx, vy)) = valid {
        check_labels(vx, vy)?;
        if vx.dim() != x.dim() {
            return Err(GbdtError::DimMismatch {
                expected: x.dim(),
                got: vx.dim(),
            });
        }
    }

    let mapper = BinMapper::fit(x, config.max_bins)?;
    let binned = mapper.transform(x)?;
    let n = x.n_rows();

    let weights: Vec<f64> = y
        .iter()
        .map(|&t| if t == 1 { config.scale_pos_weight } else { 1.0 })
        .collect();
    let w_pos: f64 = weights.iter().zip(y).filter(|(_, &t)| t == 1).map(|(w, _)| w).sum();
    let w_all: f64 = weights.iter().sum();
    let lo = 1.0 / (1.0 + PRIOR_ODDS_CAP);
    let prior = (w_pos / w_all).clamp(lo, 1.0 - lo);
    let base_score = (prior / (1.0 - prior)).ln();

    let valid_binned: Option<(BinnedMatrix, &[u8])> = match valid {
        Some((vx, vy)) => Some((mapper.transform(vx)?, vy)),
        None => None,
    };
    let mut scores = vec![base_score; n];
    let mut val_scores = valid_binned
        .as_ref()
        .map(|(b, _)| vec![base_score; b.n_rows()])
        .unwrap_or_default();

    let grow = GrowConfig {
        num_leaves: config.num_leaves,
        min_data_in_leaf: config.min_data_in_leaf,
        lambda_l2: config.lambda_l2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut log = BoostLog::default();
    let mut best: Option<(f64, usize)> = None;

    for iter in 0..config.n_trees {
        for i in 0..n {
            (grad[i], hess[i]) = logistic_grad_hess(y[i], scores[i], weights[i]);
        }
        let rows: Vec<u32> = subsample(&mut rng, n, config.bagging_fraction)
            .into_iter()
            .map(|r| r as u32)
            .collect();
        let features = subsample(&mut rng, x.dim(), config.feature_fraction);
        let mut tree = grow_tree(&binned, rows, &features, &grad, &hess, &grow);
        tree.scale(config.learning_rate);

        for (i, s) in scores.iter_mut().enumerate() {
            *s += tree.predict_binned(&binned, i);
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(GbdtError::NonFinite { iteration: iter });
        }
        log.train_loss.push(mean_logloss(&scores, y));
        trees.push(tree);

        if let Some((vb, vy)) = &valid_binned {
            let tree = trees.last().unwrap();
            for (i, s) in val_scores.iter_mut().enumerate() {
                *s += tree.predict_binned(vb, i);
            }
            let loss = mean_logloss(&val_scores, vy);
            log.val_loss.push(loss);
            if best.is_none_or(|(b, _)| loss < b) {
                best = Some((loss, iter));
            }
            if monitor(iter, loss).is_break() {
                log.interrupted = true;
                break;
            }
            if let (Some(rounds), Some((_, best_iter))) = (config.early_stopping_rounds, best) {
                if iter - best_iter >= rounds {
                    trees.truncate(best_iter + 1);
                    log.early_stopped = true;
                    break;
                }
            }
        }
    }

    log.n_trees = trees.len();
    Ok((
        GbdtModel {
            config: config.clone(),
            base_score,
            trees,
            mapper,
        },
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{evaluate, threshold_labels};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(n: usize, dim: usize, seed: u64) -> (EmbeddingMatrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = 1.0 / (dim as f64).sqrt();
        let mut values = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = (i % 2) as u8;
            let c = if y == 1 { shift } else { -shift };
            for _ in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                values.push((c + 0.15 * z) as f32);
            }
            labels.push(y);
        }
        (EmbeddingMatrix::new(n, dim, values).unwrap(), labels)
    }

    fn f1_of(model: &GbdtModel, x: &EmbeddingMatrix, y: &[u8]) -> f64 {
        let p = model.predict_matrix(x).unwrap();
        evaluate(y, &threshold_labels(&p, 0.5)).unwrap().f1
    }

    #[test]
    fn zero_trees_predicts_prior() {
        let (x, y) = blobs(40, 3, 1);
        let cfg = GbdtConfig {
            n_trees: 0,
            ..Default::default()
        };
        let (m, log) = train(&x, &y, &cfg, None).unwrap();
        assert!(m.trees.is_empty() && log.n_trees == 0);
        assert_eq!(m.base_score, 0.0);
        for r in x.rows() {
            assert_eq!(m.predict_proba(r).unwrap(), 0.5);
        }
    }

    #[test]
    fn zero_learning_rate_matches_prior_model() {
        let (x, mut y) = blobs(60, 4, 2);
        y[0] = 1 - y[0];
        let prior = train(&x, &y, &GbdtConfig { n_trees: 0, ..Default::default() }, None).unwrap().0;
        let frozen = train(
            &x,
            &y,
            &GbdtConfig {
                n_trees: 7,
                learning_rate: 0.0,
                ..Default::default()
            },
            None,
        )
        .unwrap()
        .0;
        for r in x.rows() {
            assert_eq!(
                frozen.predict_proba(r).unwrap().to_bits(),
                prior.predict_proba(r).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn gaussian_blobs_train_and_validate() {
        let (x, y) = blobs(200, 10, 3);
        let (vx, vy) = blobs(200, 10, 4);
        let (m, _) = train(&x, &y, &GbdtConfig::default(), Some((&vx, &vy))).unwrap();
        assert!(f1_of(&m, &x, &y) >= 0.99);
        assert!(f1_of(&m, &vx, &vy) >= 0.95);
    }

    #[test]
    fn continuous_xor_fits_with_four_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200;
        let mut values = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a: f32 = rng.gen_range(0.05..1.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
            let b: f32 = rng.gen_range(0.05..1.0) * if (i / 2) % 2 == 0 { 1.0 } else { -1.0 };
            values.extend([a, b]);
            y.push(u8::from((a > 0.0) != (b > 0.0)));
        }
        let x = EmbeddingMatrix::new(n, 2, values).unwrap();
        let cfg = GbdtConfig {
            n_trees: 30,
            num_leaves: 4,
            min_data_in_leaf: 5,
            learning_rate: 0.3,
            ..Default::default()
        };
        let (m, _) = train(&x, &y, &cfg, None).unwrap();
        let p = m.predict_matrix(&x).unwrap();
        assert_eq!(threshold_labels(&p, 0.5), y);
    }

    #[test]
    fn training_loss_never_increases_without_sampling() {
        let (x, mut y) = blobs(150, 5, 6);
        for i in (0..150).step_by(7) {
            y[i] = 1 - y[i];
        }
        for lr in [0.1, 0.5, 1.0] {
            let cfg = GbdtConfig {
                n_trees: 25,
                learning_rate: lr,
                min_data_in_leaf: 5,
                ..Default::default()
            };
            let (_, log) = train(&x, &y, &cfg, None).unwrap();
            for w in log.train_loss.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "lr {lr}: {:?}", log.train_loss);
            }
        }
    }

    #[test]
    fn single_class_base_score_is_clamped() {
        let (x, _) = blobs(20, 2, 7);
        let y = vec![1u8; 20];
        let (m, _) = train(&x, &y, &GbdtConfig { n_trees: 3, ..Default::default() }, None).unwrap();
        assert!((m.base_score - PRIOR_ODDS_CAP.ln()).abs() < 1e-9);
        assert!(m.predict_proba(x.row(0)).unwrap().is_finite());
    }

    #[test]
    fn scale_pos_weight_shifts_prior() {
        let (x, y) = blobs(40, 2, 8);
        let cfg = GbdtConfig {
            n_trees: 0,
            scale_pos_weight: 3.0,
            ..Default::default()
        };
        let (m, _) = train(&x, &y, &cfg, None).unwrap();
        assert!((m.base_score - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn early_stopping_truncates_to_best_iteration() {
        let (x, y) = blobs(120, 4, 9);
        let (vx, mut vy) = blobs(60, 4, 10);
        for v in vy.iter_mut() {
            *v = 1 - *v;
        }
        let cfg = GbdtConfig {
            n_trees: 50,
            early_stopping_rounds: Some(3),
            ..Default::default()
        };
        let (m, log) = train(&x, &y, &cfg, Some((&vx, &vy))).unwrap();
        assert!(log.early_stopped);
        let best = log
            .val_loss
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bl), (i, &l)| if l < bl { (i, l) } else { (bi, bl) })
            .0;
        assert_eq!(m.trees.len(), best + 1);
        assert_eq!(log.val_loss.len(), best + 4);
    }

    #[test]
    fn monitor_can_interrupt() {
        let (x, y) = blobs(60, 3, 11);
        let mut seen = Vec::new();
        let (m, log) = train_with_monitor(&x, &y, &GbdtConfig::default(), Some((&x, &y)), |it, _| {
            seen.push(it);
            if it == 4 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        })
        .unwrap();
        assert!(log.interrupted);
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        assert_eq!(m.trees.len(), 5);
    }

    #[test]
    fn sampling_is_seeded() {
        let (x, y) = blobs(100, 6, 12);
        let cfg = GbdtConfig {
            n_trees: 10,
            bagging_fraction: 0.6,
            feature_fraction: 0.5,
            seed: 77,
            ..Default::default()
        };
        let a = train(&x, &y, &cfg, None).unwrap().0;
        let b = train(&x, &y, &cfg, None).unwrap().0;
        assert_eq!(a, b);
        let c = train(&x, &y, &GbdtConfig { seed: 78, ..cfg }, None).unwrap().0;
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn thread_count_does_not_change_model() {
        let (x, y) = blobs(3000, 16, 13);
        let cfg = GbdtConfig {
            n_trees: 5,
            ..Default::default()
        };
        let multi = train(&x, &y, &cfg, None).unwrap().0;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| train(&x, &y, &cfg, None).unwrap().0);
        assert_eq!(multi, single);
    }

    #[test]
    fn input_errors() {
        let (x, y) = blobs(10, 2, 14);
        let empty = EmbeddingMatrix::new(0, 2, vec![]).unwrap();
        assert!(matches!(train(&empty, &[], &GbdtConfig::default(), None), Err(GbdtError::EmptyData)));
        assert!(matches!(train(&x, &y[..3], &GbdtConfig::default(), None), Err(GbdtError::LabelCount { .. })));
        let mut bad = y.clone();
        bad[1] = 2;
        assert!(matches!(train(&x, &bad, &GbdtConfig::default(), None), Err(GbdtError::BadLabel { row: 1, .. })));
        let (m, _) = train(&x, &y, &GbdtConfig { n_trees: 2, ..Default::default() }, None).unwrap();
        assert!(matches!(m.predict_proba(&[0.0]), Err(GbdtError::DimMismatch { expected: 2, got: 1 })));
    }
}
