//! Binary classification metrics. The positive class is label 1 and every
//! degenerate `0/0` ratio evaluates to 0.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("label vectors differ in length: {truth} true vs {pred} predicted")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label at position {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: u8 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<Confusion, MetricsError> {
    if y_true.len() != y_pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut c = Confusion::default();
    for (index, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        for value in [t, p] {
            if value > 1 {
                return Err(MetricsError::BadLabel { index, value });
            }
        }
        match (t, p) {
            (1, 1) => c.tp += 1,
            (0, 1) => c.fp += 1,
            (1, 0) => c.fn_ += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(c: &Confusion) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &Confusion) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(c: &Confusion) -> f64 {
    f1_from_pr(precision(c), recall(c))
}

/// Harmonic mean of precision and recall.
pub fn f1_from_pr(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Rounds half-up to three decimals, the presentation used in reports.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0 + 0.5).floor() / 1000.0
}

/// Labels `probs` at `threshold`: positive iff `p > threshold`, so a
/// threshold of 0 marks everything positive and 1 marks nothing.
pub fn threshold_labels(probs: &[f64], threshold: f64) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(p > threshold)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl From<Confusion> for MetricsReport {
    fn from(c: Confusion) -> Self {
        Self {
            precision: precision(&c),
            recall: recall(&c),
            f1: f1(&c),
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            tn: c.tn,
        }
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "precision={:.3} recall={:.3} f1={:.3} tp={} fp={} fn={} tn={}",
            round3(self.precision),
            round3(self.recall),
            round3(self.f1),
            self.tp,
            self.fp,
            self.fn_,
            self.tn
        )
    }
}

pub fn evaluate(y_true: &[u8], y_pred: &[u8]) -> Result<MetricsReport, MetricsError> {
    confusion(y_true, y_pred).map(MetricsReport::from)
}
