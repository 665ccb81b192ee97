//! Experiment configs and suite manifests.
//!
//! Two syntaxes are accepted. JSON: an object, an array of objects, or
//! `{"defaults": {...}, "runs": [...]}`. Text: `key = value` lines, `#`
//! comments, and optional `[run]` headers; keys above the first header are
//! shared by every run.

use std::path::PathBuf;

use semigrad::Kernel;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// One experiment: scenario, estimator, observable and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub estimator: String,
    /// Observable id; defaults to the scenario's default observable.
    #[serde(alias = "observable")]
    pub f: Option<String>,
    /// Form id for the form estimators; defaults to `exact:<f>`.
    pub form: Option<String>,
    #[serde(deserialize_with = "vector")]
    pub x0: Option<Vec<f64>>,
    #[serde(deserialize_with = "vector")]
    pub v0: Option<Vec<f64>>,
    #[serde(deserialize_with = "vector")]
    pub u0: Option<Vec<f64>>,
    /// Lie algebra direction for `lie_gradient`.
    #[serde(deserialize_with = "vector")]
    pub xi: Option<Vec<f64>>,
    #[serde(deserialize_with = "scalar")]
    pub t: f64,
    #[serde(deserialize_with = "count")]
    pub n_paths: u64,
    #[serde(deserialize_with = "count")]
    pub n_steps: u64,
    #[serde(deserialize_with = "count")]
    pub seed: u64,
    /// Constant potential for `potential_gradient`.
    pub potential: Option<f64>,
    /// Conditioning point for `score_gradient`.
    #[serde(deserialize_with = "vector")]
    pub target: Option<Vec<f64>>,
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    /// Step of the finite-difference estimator.
    pub delta: f64,
    /// Inner paths of the nested Hessian variant.
    #[serde(deserialize_with = "count")]
    pub n_inner: u64,
    /// Relative tolerance against the oracle, on top of 3 standard errors.
    pub tolerance: f64,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            estimator: String::new(),
            f: None,
            form: None,
            x0: None,
            v0: None,
            u0: None,
            xi: None,
            t: 1.0,
            n_paths: 200_000,
            n_steps: 1000,
            seed: 0,
            potential: None,
            target: None,
            bandwidth: None,
            kernel: Kernel::Box,
            delta: 1e-3,
            n_inner: 8,
            tolerance: 0.02,
            out: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a single config from text or JSON. Errors when the input
    /// holds more than one run.
    pub fn parse(input: &str) -> Result<Self, CliError> {
        let mut runs = parse_manifest(input)?;
        match runs.len() {
            0 => Ok(Self::default()),
            1 => Ok(runs.remove(0)),
            n => Err(CliError::InvalidConfig(format!("expected one run, found {n}"))),
        }
    }

    /// Applies `key=value` overrides.
    pub fn with_overrides(self, pairs: &[String]) -> Result<Self, CliError> {
        let mut map = match serde_json::to_value(&self).map_err(invalid)? {
            Value::Object(m) => m,
            _ => unreachable!("config serializes to an object"),
        };
        for pair in pairs {
            let (k, v) = split_pair(pair)?;
            map.insert(k.to_string(), text_value(v));
        }
        from_map(map)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenario.is_empty() {
            return Err(CliError::InvalidConfig("missing scenario".into()));
        }
        if self.estimator.is_empty() {
            return Err(CliError::InvalidConfig("missing estimator".into()));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(CliError::InvalidConfig(format!("t must be positive, got {}", self.t)));
        }
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(CliError::InvalidConfig("n_paths and n_steps must be at least 1".into()));
        }
        Ok(())
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::InvalidConfig(e.to_string())
}

fn from_map(map: Map<String, Value>) -> Result<ExperimentConfig, CliError> {
    serde_json::from_value(Value::Object(map)).map_err(invalid)
}

fn split_pair(line: &str) -> Result<(&str, &str), CliError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| CliError::InvalidConfig(format!("expected key=value, got {line:?}")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(CliError::InvalidConfig(format!("empty key in {line:?}")));
    }
    Ok((k, v.trim()))
}

/// JSON value of a text setting: JSON literals as is, comma lists as
/// arrays, anything else as a string.
fn text_value(v: &str) -> Value {
    if let Ok(value) = serde_json::from_str::<Value>(v) {
        return value;
    }
    if v.contains(',') {
        return Value::Array(v.split(',').map(|s| text_value(s.trim())).collect());
    }
    Value::String(v.trim_matches('"').to_string())
}

/// Parses a manifest into its runs; an empty manifest has none.
pub fn parse_manifest(input: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let trimmed = input.trim_start();
    if trimmed.starts_with('{') || trimmed.starts_with('[') {
        parse_json_manifest(trimmed)
    } else {
        parse_text_manifest(input)
    }
}

fn parse_json_manifest(input: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let value: Value = serde_json::from_str(input).map_err(invalid)?;
    let object = |v: Value| match v {
        Value::Object(m) => Ok(m),
        other => Err(CliError::InvalidConfig(format!("expected an object, got {other}"))),
    };
    let (defaults, runs) = match value {
        Value::Array(runs) => (Map::new(), runs),
        Value::Object(mut m) if m.contains_key("runs") => {
            let defaults = m.remove("defaults").map(object).transpose()?.unwrap_or_default();
            match m.remove("runs") {
                Some(Value::Array(runs)) => (defaults, runs),
                _ => return Err(CliError::InvalidConfig("`runs` must be an array".into())),
            }
        }
        Value::Object(m) => (Map::new(), vec![Value::Object(m)]),
        other => return Err(CliError::InvalidConfig(format!("unexpected manifest {other}"))),
    };
    runs.into_iter()
        .map(|run| {
            let mut merged = defaults.clone();
            merged.extend(object(run)?);
            from_map(merged)
        })
        .collect()
}

fn parse_text_manifest(input: &str) -> Result<Vec<ExperimentConfig>, CliError> {
    let mut defaults = Map::new();
    let mut runs: Vec<Map<String, Value>> = Vec::new();
    for raw in input.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "[run]" {
            runs.push(defaults.clone());
            continue;
        }
        let (k, v) = split_pair(line)?;
        let target = runs.last_mut().unwrap_or(&mut defaults);
        target.insert(k.to_string(), text_value(v));
    }
    if runs.is_empty() && !defaults.is_empty() {
        runs.push(defaults);
    }
    runs.into_iter().map(from_map).collect()
}

/// A number, or `pi`, `-pi`, `pi/k`, `k*pi`.
fn parse_scalar(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    let pi = std::f64::consts::PI;
    let value = if body == "pi" {
        pi
    } else if let Some(d) = body.strip_prefix("pi/") {
        pi / d.trim().parse::<f64>().ok()?
    } else {
        body.strip_suffix("*pi")?.trim().parse::<f64>().ok()? * pi
    };
    Some(sign * value)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Integer(u64),
    Number(f64),
    Text(String),
}

impl Scalar {
    fn value<E: de::Error>(self) -> Result<f64, E> {
        match self {
            Scalar::Integer(v) => Ok(v as f64),
            Scalar::Number(v) => Ok(v),
            Scalar::Text(s) => parse_scalar(&s).ok_or_else(|| E::custom(format!("not a number: {s:?}"))),
        }
    }
}

fn scalar<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Scalar::deserialize(d)?.value()
}

/// Non-negative integers, also written as `2e5`.
fn count<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    let v = match Scalar::deserialize(d)? {
        Scalar::Integer(n) => return Ok(n),
        other => other.value()?,
    };
    if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(de::Error::custom(format!("expected a non-negative integer, got {v}")))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VectorInput {
    Many(Vec<Scalar>),
    One(Scalar),
}

/// A scalar or a list of scalars.
fn vector<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    match Option::<VectorInput>::deserialize(d)? {
        None => Ok(None),
        Some(VectorInput::One(s)) => Ok(Some(vec![s.value()?])),
        Some(VectorInput::Many(items)) => items.into_iter().map(Scalar::value).collect::<Result<_, _>>().map(Some),
    }
}
