//! Two-layer binary classification head: `sigmoid(w2 · relu(W1ᵀx + b1) + b2)`,
//! trained on mean binary cross-entropy with Adam.
//!
//! Parameters and gradients are `f64`. Model files store `f32`, so a trained
//! head is usually passed through [`MlpParams::rounded_to_f32`] before it is
//! evaluated or saved.

mod adam;
mod io;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use io::{decode_head, encode_head, read_head, write_head, MLP_MAGIC, MLP_VERSION};
pub use train::{train_head, EpochRecord, HeadConfig, LabeledSet, TrainHistory};

use rand::Rng;
use thiserror::Error;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("expected input of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("parameter shapes do not match ({0})")]
    ParamShape(&'static str),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyTrain,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("label at row {row} is {value}, expected 0 or 1")]
    BadLabel { row: usize, value: u8 },
    #[error("invalid head config: {0}")]
    Config(String),
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("bad magic: expected MLPH, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported head model version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated head model file")]
    Truncated,
    #[error("{0} trailing bytes after head parameters")]
    TrailingBytes(usize),
    #[error("non-finite parameter in head model file")]
    NonFinite,
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln p + (1-y) ln(1-p)]` with `p` clamped away from 0 and 1. `y` may be
/// a soft target in `[0, 1]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Weights and biases of the head. `w1` is row-major `d_in x d_h`: row `i`
/// holds the weights leaving input `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    d_in: usize,
    d_h: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(d_in: usize, d_h: usize) -> Self {
        Self {
            d_in,
            d_h,
            w1: vec![0.0; d_in * d_h],
            b1: vec![0.0; d_h],
            w2: vec![0.0; d_h],
            b2: 0.0,
        }
    }

    pub fn from_parts(
        d_in: usize,
        d_h: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
    ) -> Result<Self, MlpError> {
        if w1.len() != d_in * d_h {
            return Err(MlpError::ParamShape("w1"));
        }
        if b1.len() != d_h {
            return Err(MlpError::ParamShape("b1"));
        }
        if w2.len() != d_h {
            return Err(MlpError::ParamShape("w2"));
        }
        Ok(Self {
            d_in,
            d_h,
            w1,
            b1,
            w2,
            b2,
        })
    }

    /// Uniform He initialization: weights in `±sqrt(6 / fan_in)`, zero biases.
    pub fn init_he<R: Rng>(d_in: usize, d_h: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(d_in, d_h);
        let lim1 = (6.0 / d_in as f64).sqrt();
        let lim2 = (6.0 / d_h as f64).sqrt();
        for w in &mut p.w1 {
            *w = rng.gen_range(-lim1..lim1);
        }
        for w in &mut p.w2 {
            *w = rng.gen_range(-lim2..lim2);
        }
        p
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
            .all(|v| v.is_finite())
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.d_in == other.d_in && self.d_h == other.d_h
    }

    /// Flat views in a fixed order: `w1, b1, w2, b2`.
    pub fn slices(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, std::slice::from_ref(&self.b2)]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 4] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            std::slice::from_mut(&mut self.b2),
        ]
    }

    /// Every parameter rounded through `f32`, matching a save/load cycle.
    pub fn rounded_to_f32(&self) -> Self {
        let mut p = self.clone();
        for s in p.slices_mut() {
            for v in s.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
        p
    }

    /// Folds a per-feature affine input map `x' = (x - mean) / scale` into the
    /// first layer so the head can consume raw inputs.
    pub fn fold_input_affine(&self, mean: &[f64], scale: &[f64]) -> Self {
        let mut p = self.clone();
        for i in 0..self.d_in {
            let row = &mut p.w1[i * self.d_h..(i + 1) * self.d_h];
            for (j, w) in row.iter_mut().enumerate() {
                *w /= scale[i];
                p.b1[j] -= *w * mean[i];
            }
        }
        p
    }

    fn check_input(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.d_in {
            return Err(MlpError::ShapeMismatch {
                expected: self.d_in,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden pre-activations `W1ᵀx + b1`; zero inputs are skipped.
    fn hidden_pre(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b1);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &self.w1[i * self.d_h..(i + 1) * self.d_h];
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
        }
    }

    fn logit_from_pre(&self, pre: &[f64]) -> f64 {
        self.b2
            + pre
                .iter()
                .zip(&self.w2)
                .map(|(z, w)| z.max(0.0) * w)
                .sum::<f64>()
    }

    pub fn logit(&self, x: &[f64]) -> Result<f64, MlpError> {
        self.check_input(x)?;
        let mut pre = vec![0.0; self.d_h];
        self.hidden_pre(x, &mut pre);
        Ok(self.logit_from_pre(&pre))
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, MlpError> {
        self.logit(x).map(sigmoid)
    }

    pub fn forward_f32(&self, x: &[f32]) -> Result<f64, MlpError> {
        let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        self.forward(&x)
    }
}

/// Gradient of the mean BCE over `batch` with respect to every parameter.
///
/// Targets may be soft. The gradient of the logit is `p - y`; the probability
/// clamp in [`bce_loss`] is not differentiated through.
pub fn backward(params: &MlpParams, batch: &[(&[f64], f64)]) -> Result<MlpParams, MlpError> {
    let mut grad = MlpParams::zeros(params.d_in, params.d_h);
    let mut scratch = vec![0.0; params.d_h];
    accumulate_gradient(params, batch, &mut grad, &mut scratch)?;
    Ok(grad)
}

/// Adds the batch gradient into `grad` and returns the batch's summed loss.
pub(crate) fn accumulate_gradient(
    params: &MlpParams,
    batch: &[(&[f64], f64)],
    grad: &mut MlpParams,
    pre: &mut [f64],
) -> Result<f64, MlpError> {
    if batch.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    if !params.same_shape(grad) {
        return Err(MlpError::ParamShape("gradient buffer"));
    }
    let d_h = params.d_h;
    let inv_n = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut dpre = vec![0.0; d_h];
    for &(x, y) in batch {
        params.check_input(x)?;
        params.hidden_pre(x, pre);
        let p = sigmoid(params.logit_from_pre(pre));
        loss += bce_loss(p, y);
        let dlogit = (p - y) * inv_n;
        grad.b2 += dlogit;
        for j in 0..d_h {
            let active = pre[j] > 0.0;
            grad.w2[j] += dlogit * if active { pre[j] } else { 0.0 };
            dpre[j] = if active { dlogit * params.w2[j] } else { 0.0 };
            grad.b1[j] += dpre[j];
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &mut grad.w1[i * d_h..(i + 1) * d_h];
                for (g, d) in row.iter_mut().zip(&dpre) {
                    *g += xi * d;
                }
            }
        }
    }
    Ok(loss)
}

/// Mean BCE of `params` over `batch`.
pub fn mean_loss(params: &MlpParams, batch: &[(&[f64], f64)]) -> Result<f64, MlpError> {
    if batch.is_empty() {
        return Err(MlpError::EmptyBatch);
    }
    let mut total = 0.0;
    for &(x, y) in batch {
        total += bce_loss(params.forward(x)?, y);
    }
    Ok(total / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(w1: f64, b1: f64, w2: f64, b2: f64) -> MlpParams {
        MlpParams::from_parts(1, 1, vec![w1], vec![b1], vec![w2], b2).unwrap()
    }

    #[test]
    fn zero_network_is_half() {
        let p = MlpParams::zeros(5, 3);
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), 0.5);
    }

    #[test]
    fn relu_kills_negative_input() {
        let p = tiny(1.0, 0.0, 1.0, 0.0);
        assert_eq!(p.forward(&[-3.0]).unwrap(), 0.5);
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((p.forward(&[2.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn forward_shape_error() {
        let p = MlpParams::zeros(3, 2);
        assert!(matches!(
            p.forward(&[1.0]),
            Err(MlpError::ShapeMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn forward_stays_in_open_interval() {
        let p = tiny(100.0, 0.0, 100.0, 0.0);
        let hi = p.forward(&[1.0]).unwrap();
        assert!(hi <= 1.0 && hi > 0.5);
        let lo = tiny(1.0, 0.0, 1.0, -30.0).forward(&[0.0]).unwrap();
        assert!(lo > 0.0);
        assert!(bce_loss(hi, 0.0).is_finite());
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(0.5, 0.0) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(1.0 - 1e-7, 1.0) - 1e-7).abs() < 1e-12);
        assert!((bce_loss(0.9, 0.0) - 10f64.ln()).abs() < 1e-12);
        assert!(bce_loss(1.0, 0.0).is_finite());
        assert!(bce_loss(0.0, 0.0) >= 0.0);
    }

    #[test]
    fn soft_target_at_half_zeroes_output_bias_gradient() {
        let p = MlpParams::zeros(2, 2);
        let x = [0.3, -0.7];
        let g = backward(&p, &[(&x, 0.5)]).unwrap();
        assert_eq!(g.b2, 0.0);
    }

    #[test]
    fn hand_derived_single_sample_gradient() {
        // z1 = w1 x + b1 > 0, a = z1, z2 = w2 a + b2, p = sigmoid(z2), d = p - y
        let (w1, b1, w2, b2, x, y) = (0.5, 0.1, -0.8, 0.2, 1.5, 1.0);
        let p = tiny(w1, b1, w2, b2);
        let g = backward(&p, &[(&[x], y)]).unwrap();
        let a = w1 * x + b1;
        let d = sigmoid(w2 * a + b2) - y;
        assert!((g.b2 - d).abs() < 1e-15);
        assert!((g.w2[0] - d * a).abs() < 1e-15);
        assert!((g.b1[0] - d * w2).abs() < 1e-15);
        assert!((g.w1[0] - d * w2 * x).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let p = MlpParams::init_he(8, 4, &mut rng);
        let xs: Vec<Vec<f64>> = (0..16)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let batch: Vec<(&[f64], f64)> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x.as_slice(), (i % 2) as f64))
            .collect();
        let g = backward(&p, &batch).unwrap();
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for s in 0..4 {
            for k in 0..p.slices()[s].len() {
                let mut plus = p.clone();
                plus.slices_mut()[s][k] += h;
                let mut minus = p.clone();
                minus.slices_mut()[s][k] -= h;
                let fd = (mean_loss(&plus, &batch).unwrap() - mean_loss(&minus, &batch).unwrap()) / (2.0 * h);
                let an = g.slices()[s][k];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-7);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn backward_errors() {
        let p = MlpParams::zeros(2, 2);
        assert!(matches!(backward(&p, &[]), Err(MlpError::EmptyBatch)));
        assert!(matches!(
            backward(&p, &[(&[1.0], 0.0)]),
            Err(MlpError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fold_affine_matches_standardized_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = MlpParams::init_he(3, 4, &mut rng);
        let mean = [0.5, -1.0, 2.0];
        let scale = [2.0, 0.5, 4.0];
        let x = [1.0, 0.25, -3.0];
        let z: Vec<f64> = (0..3).map(|i| (x[i] - mean[i]) / scale[i]).collect();
        let folded = p.fold_input_affine(&mean, &scale);
        assert!((folded.logit(&x).unwrap() - p.logit(&z).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rounding_to_f32() {
        let p = tiny(0.1, 0.2, 0.3, 0.4);
        let r = p.rounded_to_f32();
        assert_eq!(r.w1[0], 0.1f32 as f64);
        assert_eq!(r.rounded_to_f32(), r);
    }
}
