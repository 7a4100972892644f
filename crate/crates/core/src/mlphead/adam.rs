use serde::{Deserialize, Serialize};

use super::{MlpError, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(MlpError::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// First and second moments shaped like the parameters, plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: MlpParams,
    pub v: MlpParams,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(like: &MlpParams, config: AdamConfig) -> Self {
        Self {
            m: MlpParams::zeros(like.d_in(), like.d_h()),
            v: MlpParams::zeros(like.d_in(), like.d_h()),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of a flat parameter slice at step `t`
/// (already incremented, so `t >= 1`).
pub fn adam_update(theta: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], t: u64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (((p, &g), m), v) in theta.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

pub fn adam_step(params: &mut MlpParams, grad: &MlpParams, state: &mut AdamState) -> Result<(), MlpError> {
    if !(params.same_shape(grad) && params.same_shape(&state.m)) {
        return Err(MlpError::ParamShape("adam step"));
    }
    state.t += 1;
    let t = state.t;
    let cfg = state.config;
    let grads = grad.slices();
    let [m0, m1, m2, m3] = state.m.slices_mut();
    let [v0, v1, v2, v3] = state.v.slices_mut();
    let ms = [m0, m1, m2, m3];
    let vs = [v0, v1, v2, v3];
    for (((theta, g), m), v) in params.slices_mut().into_iter().zip(grads).zip(ms).zip(vs) {
        adam_update(theta, g, m, v, t, &cfg);
    }
    Ok(())
}
