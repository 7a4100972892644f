use serde::{Deserialize, Serialize};

use super::GbdtError;

/// Booster hyperparameters. Unknown keys are rejected when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub num_leaves: usize,
    pub min_data_in_leaf: usize,
    pub max_bins: usize,
    pub learning_rate: f64,
    pub lambda_l2: f64,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub scale_pos_weight: f64,
    pub seed: u64,
    /// Stop after this many iterations without validation-loss improvement.
    /// Only used when a validation set is supplied.
    pub early_stopping_rounds: Option<usize>,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            num_leaves: 31,
            min_data_in_leaf: 20,
            max_bins: 255,
            learning_rate: 0.1,
            lambda_l2: 0.0,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            scale_pos_weight: 1.0,
            seed: 0,
            early_stopping_rounds: None,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let fail = |msg: &str| Err(GbdtError::Config(msg.to_string()));
        if self.num_leaves < 2 {
            return fail("num_leaves must be >= 2");
        }
        if !(2..=u16::MAX as usize + 1).contains(&self.max_bins) {
            return fail("max_bins must lie in [2, 65536]");
        }
        if self.min_data_in_leaf == 0 {
            return fail("min_data_in_leaf must be >= 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and >= 0");
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return fail("lambda_l2 must be finite and >= 0");
        }
        for (name, v) in [
            ("feature_fraction", self.feature_fraction),
            ("bagging_fraction", self.bagging_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(GbdtError::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.scale_pos_weight > 0.0 && self.scale_pos_weight.is_finite()) {
            return fail("scale_pos_weight must be finite and > 0");
        }
        Ok(())
    }
}
