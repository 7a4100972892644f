//! Second-order split search over bin histograms.

use super::histogram::{BinStat, Histogram};

/// `G² / (H + λ)`, or 0 when the denominator vanishes.
#[inline]
pub fn leaf_score(grad: f64, hess: f64, lambda: f64) -> f64 {
    let den = hess + lambda;
    if den > 0.0 {
        grad * grad / den
    } else {
        0.0
    }
}

/// Optimal leaf output `-G / (H + λ)`, or 0 when the denominator vanishes.
#[inline]
pub fn leaf_value(grad: f64, hess: f64, lambda: f64) -> f64 {
    let den = hess + lambda;
    if den > 0.0 {
        -grad / den
    } else {
        0.0
    }
}

/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)`.
#[inline]
pub fn split_gain(left: BinStat, right: BinStat, parent: BinStat, lambda: f64) -> f64 {
    leaf_score(left.grad, left.hess, lambda) + leaf_score(right.grad, right.hess, lambda)
        - leaf_score(parent.grad, parent.hess, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConstraints {
    pub lambda_l2: f64,
    pub min_data_in_leaf: usize,
}

/// Rows with bin `<= bin` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin: u16,
    pub gain: f64,
    pub left: BinStat,
    pub right: BinStat,
}

/// Best split over `features` (ascending) and their bin boundaries. Both sides
/// need at least `min_data_in_leaf` rows; ties keep the lower feature, then
/// the lower bin. Returns `None` unless some gain is strictly positive.
pub fn best_split(
    hist: &Histogram,
    features: &[usize],
    parent: BinStat,
    constraints: &SplitConstraints,
) -> Option<SplitCandidate> {
    let min_leaf = constraints.min_data_in_leaf as u32;
    if parent.count < 2 * min_leaf.max(1) {
        return None;
    }
    let mut best: Option<SplitCandidate> = None;
    for &f in features {
        let bins = hist.feature(f);
        let mut left = BinStat::default();
        for (b, stat) in bins.iter().enumerate().take(bins.len().saturating_sub(1)) {
            left = left.plus(*stat);
            if left.count < min_leaf {
                continue;
            }
            let right = parent.minus(left);
            if right.count < min_leaf {
                break;
            }
            let gain = split_gain(left, right, parent, constraints.lambda_l2);
            if gain > 0.0 && best.is_none_or(|s| gain > s.gain) {
                best = Some(SplitCandidate {
                    feature: f,
                    bin: b as u16,
                    gain,
                    left,
                    right,
                });
            }
        }
    }
    best
}
