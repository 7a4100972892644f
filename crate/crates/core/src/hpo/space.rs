use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HpoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Int,
    Float,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub scale: Scale,
}

impl ParamSpec {
    pub fn int(name: &str, low: i64, high: i64, scale: Scale) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Int,
            low: low as f64,
            high: high as f64,
            scale,
        }
    }

    pub fn float(name: &str, low: f64, high: f64, scale: Scale) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Float,
            low,
            high,
            scale,
        }
    }

    pub fn validate(&self) -> Result<(), HpoError> {
        let bad = |msg: &str| Err(HpoError::BadSpec(format!("{}: {msg}", self.name)));
        if self.name.is_empty() {
            return Err(HpoError::BadSpec("parameter name is empty".into()));
        }
        if !(self.low.is_finite() && self.high.is_finite()) {
            return bad("bounds must be finite");
        }
        if self.low >= self.high {
            return bad("low must be < high");
        }
        if self.scale == Scale::Log && self.low <= 0.0 {
            return bad("log scale requires low > 0");
        }
        if self.kind == ParamKind::Int && self.low.ceil() > self.high.floor() {
            return bad("int range contains no integer");
        }
        Ok(())
    }

    /// One draw, uniform on the (possibly log-transformed) range. Ints are
    /// rounded, then clamped to the integers inside `[low, high]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        let u: f64 = rng.gen();
        let v = match self.scale {
            Scale::Linear => self.low + u * (self.high - self.low),
            Scale::Log => {
                let (a, b) = (self.low.ln(), self.high.ln());
                (a + u * (b - a)).exp()
            }
        };
        match self.kind {
            ParamKind::Int => {
                ParamValue::Int(v.round().clamp(self.low.ceil(), self.high.floor()) as i64)
            }
            ParamKind::Float => ParamValue::Float(v.clamp(self.low, self.high)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(v) => v as f64,
            ParamValue::Float(v) => v,
        }
    }
}

/// Parameter assignment in search-space order.
pub type Params = IndexMap<String, ParamValue>;

pub fn validate_space(space: &[ParamSpec]) -> Result<(), HpoError> {
    for (i, spec) in space.iter().enumerate() {
        spec.validate()?;
        if space[..i].iter().any(|s| s.name == spec.name) {
            return Err(HpoError::BadSpec(format!("duplicate parameter {}", spec.name)));
        }
    }
    Ok(())
}

/// Draws every parameter independently, in space order.
pub fn sample<R: Rng + ?Sized>(space: &[ParamSpec], rng: &mut R) -> Params {
    space
        .iter()
        .map(|s| (s.name.clone(), s.sample(rng)))
        .collect()
}

/// Default booster search space.
pub fn default_gbdt_space() -> Vec<ParamSpec> {
    vec![
        ParamSpec::int("num_leaves", 4, 128, Scale::Log),
        ParamSpec::float("learning_rate", 1e-3, 0.3, Scale::Log),
        ParamSpec::int("n_trees", 50, 500, Scale::Linear),
        ParamSpec::int("min_data_in_leaf", 5, 100, Scale::Log),
        ParamSpec::float("lambda_l2", 1e-3, 10.0, Scale::Log),
        ParamSpec::float("feature_fraction", 0.5, 1.0, Scale::Linear),
        ParamSpec::float("bagging_fraction", 0.5, 1.0, Scale::Linear),
    ]
}
