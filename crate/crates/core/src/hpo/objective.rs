use std::ops::ControlFlow;

use super::space::{ParamValue, Params};
use super::study::{TrialContext, TrialError};
use crate::embedio::EmbeddingMatrix;
use crate::gbdt::{train_with_monitor, GbdtConfig};
use crate::metrics::{confusion, f1, threshold_labels};

/// Boosting iterations between reported checkpoints.
pub const CHECKPOINT_EVERY: usize = 10;

/// Tunes a booster: each trial trains on `train`, reports negative
/// validation log-loss every [`CHECKPOINT_EVERY`] iterations and scores
/// validation F1 at `threshold`.
pub struct GbdtObjective<'a> {
    pub base: GbdtConfig,
    pub train: (&'a EmbeddingMatrix, &'a [u8]),
    pub val: (&'a EmbeddingMatrix, &'a [u8]),
    pub threshold: f64,
}

fn as_count(name: &str, v: ParamValue) -> Result<usize, String> {
    let x = v.as_f64().round();
    if x >= 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(format!("{name} = {x} is not a valid count"))
    }
}

/// `base` with the sampled parameters applied.
pub fn apply_params(base: &GbdtConfig, params: &Params) -> Result<GbdtConfig, String> {
    let mut cfg = base.clone();
    for (name, &v) in params {
        match name.as_str() {
            "n_trees" => cfg.n_trees = as_count(name, v)?,
            "num_leaves" => cfg.num_leaves = as_count(name, v)?,
            "min_data_in_leaf" => cfg.min_data_in_leaf = as_count(name, v)?,
            "max_bins" => cfg.max_bins = as_count(name, v)?,
            "learning_rate" => cfg.learning_rate = v.as_f64(),
            "lambda_l2" => cfg.lambda_l2 = v.as_f64(),
            "feature_fraction" => cfg.feature_fraction = v.as_f64(),
            "bagging_fraction" => cfg.bagging_fraction = v.as_f64(),
            "scale_pos_weight" => cfg.scale_pos_weight = v.as_f64(),
            other => return Err(format!("unknown booster parameter {other}")),
        }
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

impl GbdtObjective<'_> {
    pub fn evaluate(&self, params: &Params, ctx: &mut TrialContext<'_>) -> Result<f64, TrialError> {
        let cfg = apply_params(&self.base, params).map_err(TrialError::Failed)?;
        let mut stop = None;
        let (model, _) = train_with_monitor(self.train.0, self.train.1, &cfg, Some(self.val), |iter, loss| {
            if (iter + 1) % CHECKPOINT_EVERY != 0 {
                return ControlFlow::Continue(());
            }
            match ctx.report(-loss) {
                Ok(()) => ControlFlow::Continue(()),
                Err(e) => {
                    stop = Some(e);
                    ControlFlow::Break(())
                }
            }
        })
        .map_err(|e| TrialError::Failed(e.to_string()))?;
        if let Some(e) = stop {
            return Err(e);
        }
        let probs = model
            .predict_matrix(self.val.0)
            .map_err(|e| TrialError::Failed(e.to_string()))?;
        let c = confusion(self.val.1, &threshold_labels(&probs, self.threshold))
            .map_err(|e| TrialError::Failed(e.to_string()))?;
        Ok(f1(&c))
    }
}
