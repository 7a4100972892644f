//! Histogram gradient-boosted decision trees for binary classification.
//!
//! Features are quantile-binned once, trees grow leaf-wise on second-order
//! logistic statistics with an L2 leaf penalty, and rows/features can be
//! subsampled per tree from a seeded ChaCha8 stream. Gradients, hessians and
//! histogram sums are `f64`; features stay `f32`.

mod bins;
mod booster;
mod config;
mod histogram;
mod io;
mod split;
mod tree;

pub use bins::{BinMapper, BinnedMatrix};
pub use booster::{train, train_with_monitor, BoostLog, GbdtModel, PRIOR_ODDS_CAP};
pub use config::GbdtConfig;
pub use histogram::{BinStat, Histogram};
pub use io::{decode_model, encode_model, read_model, write_model, GBDT_MAGIC, GBDT_VERSION};
pub use split::{best_split, leaf_score, leaf_value, split_gain, SplitCandidate, SplitConstraints};
pub use tree::{grow_tree, GrowConfig, Tree, TreeNode};

use thiserror::Error;

use crate::mlphead::sigmoid;

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("training data is empty")]
    EmptyData,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("label at row {row} is {value}, expected 0 or 1")]
    BadLabel { row: usize, value: u8 },
    #[error("invalid booster config: {0}")]
    Config(String),
    #[error("expected {expected} features, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite scores after iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("bad magic: expected GBDT, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported booster model version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated booster model file")]
    Truncated,
    #[error("{0} trailing bytes after booster model")]
    TrailingBytes(usize),
    #[error("corrupt booster model: {0}")]
    Corrupt(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Weighted logistic-loss gradient and hessian at log-odds `score`:
/// `g = w (p - y)`, `h = w p (1 - p)` with `p = sigmoid(score)`.
#[inline]
pub fn logistic_grad_hess(y: u8, score: f64, weight: f64) -> (f64, f64) {
    let p = sigmoid(score);
    (weight * (p - y as f64), weight * p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_hess_examples() {
        assert_eq!(logistic_grad_hess(1, 0.0, 1.0), (-0.5, 0.25));
        assert_eq!(logistic_grad_hess(0, 0.0, 1.0), (0.5, 0.25));
        let p = 1.0 / (1.0 + (-2.0f64).exp());
        let (g, h) = logistic_grad_hess(1, 2.0, 1.0);
        assert!((g - (p - 1.0)).abs() < 1e-15 && (g + 0.1192).abs() < 1e-4);
        assert!((h - p * (1.0 - p)).abs() < 1e-15 && (h - 0.1050).abs() < 1e-4);
        let (gw, hw) = logistic_grad_hess(1, 2.0, 3.0);
        assert!((gw - 3.0 * g).abs() < 1e-15 && (hw - 3.0 * h).abs() < 1e-15);
    }
}
