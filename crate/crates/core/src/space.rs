//! Mixed-type parameter spaces and their embedding into the unit hypercube.
//!
//! Each parameter owns one axis of `[0, 1]^D`, in declaration order:
//!
//! * categorical with `k` values: value `i` sits at the bin midpoint `(i + 0.5) / k`
//!   and any `u` decodes to `min(floor(u * k), k - 1)`;
//! * integer: affine map of `[min, max]`, decoded by rounding;
//! * continuous: affine map of `[min, max]` (or of `[ln min, ln max]` on a log scale).

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ParameterKind {
    Categorical {
        #[serde(deserialize_with = "labels_from_json")]
        values: Vec<String>,
    },
    Integer {
        min: i64,
        max: i64,
    },
    Continuous {
        min: f64,
        max: f64,
        #[serde(default)]
        scale: Scale,
    },
}

/// Space files may list categories as numbers (`[32, 64]`); they are kept as labels.
fn labels_from_json<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    let raw = Vec::<Value>::deserialize(d)?;
    raw.into_iter()
        .map(|v| match v {
            Value::String(s) => Ok(s),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            other => Err(serde::de::Error::custom(format!(
                "category labels must be strings or numbers, got {other}"
            ))),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ParameterKind,
}

impl ParameterSpec {
    pub fn categorical<S: Into<String>>(name: &str, values: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.to_string(),
            kind: ParameterKind::Categorical {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn integer(name: &str, min: i64, max: i64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParameterKind::Integer { min, max },
        }
    }

    pub fn continuous(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParameterKind::Continuous {
                min,
                max,
                scale: Scale::Linear,
            },
        }
    }

    pub fn log_continuous(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParameterKind::Continuous {
                min,
                max,
                scale: Scale::Log,
            },
        }
    }

    fn domain_error(&self, reason: impl Into<String>) -> Error {
        Error::Domain {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn encode_value(&self, value: &ParamValue) -> Result<f64> {
        match (&self.kind, value) {
            (ParameterKind::Categorical { values }, ParamValue::Category(label)) => {
                let idx = values
                    .iter()
                    .position(|v| v == label)
                    .ok_or_else(|| self.domain_error(format!("unknown category `{label}`")))?;
                Ok((idx as f64 + 0.5) / values.len() as f64)
            }
            (ParameterKind::Integer { min, max }, ParamValue::Integer(v)) => {
                if v < min || v > max {
                    return Err(self.domain_error(format!("{v} outside [{min}, {max}]")));
                }
                Ok((v - min) as f64 / (max - min) as f64)
            }
            (ParameterKind::Continuous { min, max, scale }, ParamValue::Real(v)) => {
                if !v.is_finite() || v < min || v > max {
                    return Err(self.domain_error(format!("{v} outside [{min}, {max}]")));
                }
                let u = match scale {
                    Scale::Linear => (v - min) / (max - min),
                    Scale::Log => (v.ln() - min.ln()) / (max.ln() - min.ln()),
                };
                Ok(u.clamp(0.0, 1.0))
            }
            (_, other) => Err(self.domain_error(format!("value {other} has the wrong type"))),
        }
    }

    fn decode_coord(&self, u: f64) -> ParamValue {
        let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, 1.0) };
        match &self.kind {
            ParameterKind::Categorical { values } => {
                let k = values.len();
                let idx = ((u * k as f64).floor() as usize).min(k - 1);
                ParamValue::Category(values[idx].clone())
            }
            ParameterKind::Integer { min, max } => {
                let v = (*min as f64 + u * (max - min) as f64).round() as i64;
                ParamValue::Integer(v.clamp(*min, *max))
            }
            ParameterKind::Continuous { min, max, scale } => {
                let v = match scale {
                    Scale::Linear => min + u * (max - min),
                    Scale::Log => (min.ln() + u * (max.ln() - min.ln())).exp(),
                };
                ParamValue::Real(v.clamp(*min, *max))
            }
        }
    }

    fn value_from_json(&self, v: &Value) -> Result<ParamValue> {
        let value = match &self.kind {
            ParameterKind::Categorical { .. } => match v {
                Value::String(s) => ParamValue::Category(s.clone()),
                Value::Number(n) => ParamValue::Category(n.to_string()),
                _ => return Err(self.domain_error(format!("expected a category label, got {v}"))),
            },
            ParameterKind::Integer { .. } => match v.as_i64() {
                Some(i) => ParamValue::Integer(i),
                None => return Err(self.domain_error(format!("expected an integer, got {v}"))),
            },
            ParameterKind::Continuous { .. } => match v.as_f64() {
                Some(x) => ParamValue::Real(x),
                None => return Err(self.domain_error(format!("expected a number, got {v}"))),
            },
        };
        self.encode_value(&value)?;
        Ok(value)
    }

    /// Number of distinct settings, with `resolution` standing in for a continuum.
    fn log_cardinality(&self, resolution: u32) -> f64 {
        match &self.kind {
            ParameterKind::Categorical { values } => (values.len() as f64).ln(),
            ParameterKind::Integer { min, max } => ((max - min + 1) as f64).ln(),
            ParameterKind::Continuous { .. } => f64::from(resolution).ln(),
        }
    }
}

/// A single parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamValue {
    Category(String),
    Integer(i64),
    Real(f64),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Category(s) => f.pad(s),
            ParamValue::Integer(i) => fmt::Display::fmt(i, f),
            ParamValue::Real(x) => fmt::Display::fmt(x, f),
        }
    }
}

/// A point of the space; `values[i]` belongs to `space.params[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub values: Vec<ParamValue>,
}

impl Configuration {
    pub fn new(values: Vec<ParamValue>) -> Self {
        Self { values }
    }
}

/// One invariant violation reported by [`ParameterSpace::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub param: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.param {
            Some(p) => write!(f, "`{p}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub params: Vec<ParameterSpec>,
}

impl ParameterSpace {
    /// Builds a space, rejecting it if [`validate`](Self::validate) finds anything.
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        let space = Self { params };
        let violations = space.validate();
        if violations.is_empty() {
            Ok(space)
        } else {
            Err(Error::InvalidSpace(
                violations.iter().map(ToString::to_string).collect(),
            ))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ParameterSpace = serde_json::from_str(s)?;
        Self::new(raw.params)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serialises")
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    /// All invariant violations; empty means the space is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |param: Option<&str>, message: &str| {
            out.push(Violation {
                param: param.map(str::to_string),
                message: message.to_string(),
            })
        };
        if self.params.is_empty() {
            push(None, "space has no parameters");
        }
        let mut seen = HashSet::new();
        for p in &self.params {
            let name = Some(p.name.as_str());
            if p.name.is_empty() {
                push(None, "empty name");
            } else if !seen.insert(p.name.as_str()) {
                push(name, "duplicate name");
            }
            match &p.kind {
                ParameterKind::Categorical { values } => {
                    if values.len() < 2 {
                        push(name, "categorical needs at least 2 values");
                    }
                    let distinct: HashSet<_> = values.iter().collect();
                    if distinct.len() != values.len() {
                        push(name, "duplicate category value");
                    }
                }
                ParameterKind::Integer { min, max } => {
                    if min >= max {
                        push(name, "min < max required");
                    }
                }
                ParameterKind::Continuous { min, max, scale } => {
                    if !min.is_finite() || !max.is_finite() {
                        push(name, "bounds must be finite");
                    } else if min >= max {
                        push(name, "min < max required");
                    }
                    if *scale == Scale::Log && *min <= 0.0 {
                        push(name, "log scale requires min > 0");
                    }
                }
            }
        }
        out
    }

    pub fn check(&self, config: &Configuration) -> Result<()> {
        self.encode(config).map(|_| ())
    }

    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        if config.values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: config.values.len(),
            });
        }
        self.params
            .iter()
            .zip(&config.values)
            .map(|(p, v)| p.encode_value(v))
            .collect()
    }

    /// Total map from the unit cube; coordinates outside `[0, 1]` are clamped.
    pub fn decode(&self, u: &[f64]) -> Configuration {
        assert_eq!(u.len(), self.dim(), "unit vector has wrong dimension");
        Configuration::new(
            self.params
                .iter()
                .zip(u)
                .map(|(p, &x)| p.decode_coord(x))
                .collect(),
        )
    }

    /// Projects a unit vector onto the representable grid (`encode(decode(u))`).
    pub fn snap(&self, u: &[f64]) -> Vec<f64> {
        self.encode(&self.decode(u))
            .expect("decoded configurations are always in the domain")
    }

    pub fn sample_random(&self, rng: &mut impl rand::Rng) -> Configuration {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        self.decode(&u)
    }

    /// Natural log of the (proxied) number of configurations.
    pub fn log_cardinality(&self, resolution: u32) -> f64 {
        self.params.iter().map(|p| p.log_cardinality(resolution)).sum()
    }

    pub fn config_to_json(&self, config: &Configuration) -> Map<String, Value> {
        self.params
            .iter()
            .zip(&config.values)
            .map(|(p, v)| {
                let json = serde_json::to_value(v).expect("parameter values serialise");
                (p.name.clone(), json)
            })
            .collect()
    }

    pub fn config_from_json(&self, map: &Map<String, Value>) -> Result<Configuration> {
        if map.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: map.len(),
            });
        }
        let values = self
            .params
            .iter()
            .map(|p| {
                let v = map.get(&p.name).ok_or_else(|| Error::Domain {
                    name: p.name.clone(),
                    reason: "missing from configuration".into(),
                })?;
                p.value_from_json(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Configuration::new(values))
    }
}
