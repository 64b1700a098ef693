//! JSON configuration files.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::{ConeBarrier, MarketModel};
use crate::reflection::{generate_group, FundamentalSystem, FundamentalSystemJson, ReflectionGroup, DEFAULT_MAX_ORDER};

/// A root system given by name (`"A2"`, `"I2(5)"`, `"orthogonal(1)"`) or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemSpec {
    Name(String),
    Explicit(FundamentalSystemJson),
}

impl SystemSpec {
    pub fn build(&self) -> Result<FundamentalSystem> {
        match self {
            SystemSpec::Name(name) => FundamentalSystem::from_name(name),
            SystemSpec::Explicit(json) => FundamentalSystem::from_json(json),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SystemSpec::Name(name) => name.clone(),
            SystemSpec::Explicit(_) => "custom".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `(n+1) x d` volatility matrix, row 0 zero.
    pub lambda: Vec<Vec<f64>>,
    pub r: f64,
    pub s0: Vec<f64>,
    pub system: SystemSpec,
    /// Positive root scalings; defaults to all ones.
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    #[serde(rename = "H")]
    pub levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
}

/// Everything derived from a model configuration.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: MarketModel,
    pub system: FundamentalSystem,
    pub barrier: ConeBarrier,
    pub group: ReflectionGroup,
    pub label: String,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn build(&self) -> Result<Setup> {
        let lambda: DMatrix<f64> = linalg::from_rows(&self.lambda, "lambda")?;
        let model = MarketModel::new(lambda, self.r, DVector::from_vec(self.s0.clone()))?;
        let system = self.system.build()?;
        let nu = self.nu.clone().unwrap_or_else(|| vec![1.0; system.rank()]);
        let barrier = ConeBarrier::new(&model, &system, &nu, &self.levels)?;
        let group = generate_group(&system, self.max_order.unwrap_or(DEFAULT_MAX_ORDER))?;
        Ok(Setup {
            model,
            system,
            barrier,
            group,
            label: self.system.label(),
        })
    }
}

/// Input of the `density` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub system: SystemSpec,
    pub t: f64,
    pub x: Vec<f64>,
    #[serde(default)]
    pub y: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
}

impl DensityConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Explicit `y` points, or a 21-per-axis grid over `x ± 4√t` kept inside the chamber.
    pub fn points(&self, fs: &FundamentalSystem) -> Result<Vec<DVector<f64>>> {
        if let Some(ys) = &self.y {
            return Ok(ys.iter().map(|y| DVector::from_vec(y.clone())).collect());
        }
        let d = fs.dim();
        if d > 3 {
            return Err(Error::Config("a y grid must be given for dimensions above 3".into()));
        }
        if self.x.len() != d {
            return Err(Error::Config(format!("x has {} entries, expected {d}", self.x.len())));
        }
        const N: usize = 21;
        let half = 4.0 * self.t.sqrt();
        let mut out = Vec::new();
        for flat in 0..N.pow(d as u32) {
            let mut rem = flat;
            let mut y = DVector::zeros(d);
            for k in (0..d).rev() {
                let i = rem % N;
                rem /= N;
                y[k] = self.x[k] - half + 2.0 * half * i as f64 / (N - 1) as f64;
            }
            if fs.chamber_contains(&y) {
                out.push(y);
            }
        }
        Ok(out)
    }
}
