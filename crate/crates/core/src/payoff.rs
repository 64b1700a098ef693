//! Payoffs written on the barrier index vector `S^C`.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffSpec {
    /// `(S^{C_k} - K)+`; `index` is zero-based.
    Call { index: usize, strike: f64 },
    Put { index: usize, strike: f64 },
    /// `1{S^{C_k} > K}`.
    Digital { index: usize, strike: f64 },
    Tabulated(TabulatedPayoff),
}

impl PayoffSpec {
    pub fn evaluate(&self, sc: &[f64]) -> f64 {
        match self {
            PayoffSpec::Call { index, strike } => (sc[*index] - strike).max(0.0),
            PayoffSpec::Put { index, strike } => (strike - sc[*index]).max(0.0),
            PayoffSpec::Digital { index, strike } => {
                if sc[*index] > *strike {
                    1.0
                } else {
                    0.0
                }
            }
            PayoffSpec::Tabulated(t) => t.evaluate(sc),
        }
    }

    /// Largest index component the payoff reads, plus one.
    pub fn arity(&self) -> usize {
        match self {
            PayoffSpec::Call { index, .. } | PayoffSpec::Put { index, .. } | PayoffSpec::Digital { index, .. } => {
                index + 1
            }
            PayoffSpec::Tabulated(t) => t.axes.len(),
        }
    }

    pub fn has_linear_growth(&self) -> bool {
        match self {
            PayoffSpec::Tabulated(t) => t.linear_growth,
            _ => true,
        }
    }

    /// Checks the payoff against an `m`-component index.
    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            PayoffSpec::Call { index, strike } | PayoffSpec::Put { index, strike } | PayoffSpec::Digital { index, strike } => {
                if *index >= m {
                    return Err(Error::Config(format!(
                        "payoff index k={} exceeds the {m} barrier components",
                        index + 1
                    )));
                }
                if !strike.is_finite() || *strike < 0.0 {
                    return Err(Error::Config("strike must be finite and non-negative".into()));
                }
            }
            PayoffSpec::Tabulated(t) => {
                t.validate()?;
                if t.axes.len() != m {
                    return Err(Error::Config(format!(
                        "tabulated payoff has {} axes, the barrier has {m} components",
                        t.axes.len()
                    )));
                }
            }
        }
        if !self.has_linear_growth() {
            return Err(Error::Config("payoff must be asserted to have at most linear growth".into()));
        }
        Ok(())
    }
}

/// Parses `call:k=1,K=100`, `put:k=2,K=0.9` or `digital:k=1,K=1.1` (`k` one-based).
impl FromStr for PayoffSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("payoff {s:?}: {msg}"));
        let (kind, params) = s.split_once(':').ok_or_else(|| bad("expected <kind>:k=<i>,K=<strike>"))?;
        let mut index = None;
        let mut strike = None;
        for kv in params.split(',') {
            let (key, value) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            match key.trim() {
                "k" => {
                    let k: usize = value.trim().parse().map_err(|_| bad("k must be a positive integer"))?;
                    if k == 0 {
                        return Err(bad("k is one-based"));
                    }
                    index = Some(k - 1);
                }
                "K" => strike = Some(value.trim().parse::<f64>().map_err(|_| bad("K must be a number"))?),
                other => return Err(bad(&format!("unknown parameter {other:?}"))),
            }
        }
        let index = index.unwrap_or(0);
        let strike = strike.ok_or_else(|| bad("missing strike K"))?;
        match kind.trim() {
            "call" => Ok(PayoffSpec::Call { index, strike }),
            "put" => Ok(PayoffSpec::Put { index, strike }),
            "digital" => Ok(PayoffSpec::Digital { index, strike }),
            other => Err(bad(&format!("unknown payoff kind {other:?}"))),
        }
    }
}

/// A payoff tabulated on a log-spaced grid over `S^C`, interpolated
/// multilinearly in log coordinates and held flat outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPayoff {
    /// Ascending positive nodes per index component.
    pub axes: Vec<Vec<f64>>,
    /// Values in row-major order, the last axis varying fastest.
    pub values: Vec<f64>,
    /// User assertion that the tabulated function grows at most linearly.
    pub linear_growth: bool,
}

impl TabulatedPayoff {
    pub fn from_fn<F>(low: &[f64], high: &[f64], points: usize, linear_growth: bool, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        if low.len() != high.len() || low.is_empty() || points < 2 {
            return Err(Error::Config("tabulation needs matching bounds and at least two points".into()));
        }
        let axes: Vec<Vec<f64>> = low
            .iter()
            .zip(high)
            .map(|(&lo, &hi)| {
                let (a, b) = (lo.ln(), hi.ln());
                (0..points)
                    .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                    .collect()
            })
            .collect();
        let total = points.pow(axes.len() as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; axes.len()];
        for flat in 0..total {
            let mut rem = flat;
            for k in (0..axes.len()).rev() {
                x[k] = axes[k][rem % points];
                rem /= points;
            }
            values.push(f(&x));
        }
        let t = TabulatedPayoff {
            axes,
            values,
            linear_growth,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Config("tabulated payoff needs at least one axis".into()));
        }
        for axis in &self.axes {
            if axis.len() < 2 || axis.iter().any(|&v| !(v > 0.0)) || axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("each axis needs >= 2 ascending positive nodes".into()));
            }
        }
        let expected: usize = self.axes.iter().map(Vec::len).product();
        if self.values.len() != expected {
            return Err(Error::Config(format!(
                "tabulated payoff has {} values, expected {expected}",
                self.values.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, sc: &[f64]) -> f64 {
        let dims = self.axes.len();
        // bracketing cell and weight along each axis
        let mut lower = vec![0usize; dims];
        let mut frac = vec![0.0; dims];
        for k in 0..dims {
            let axis = &self.axes[k];
            let x = sc[k].ln();
            let n = axis.len();
            if x <= axis[0].ln() {
                lower[k] = 0;
                frac[k] = 0.0;
            } else if x >= axis[n - 1].ln() {
                lower[k] = n - 2;
                frac[k] = 1.0;
            } else {
                let i = axis.partition_point(|&a| a.ln() <= x).saturating_sub(1).min(n - 2);
                let (a, b) = (axis[i].ln(), axis[i + 1].ln());
                lower[k] = i;
                frac[k] = (x - a) / (b - a);
            }
        }
        let mut total = 0.0;
        for corner in 0..(1usize << dims) {
            let mut weight = 1.0;
            let mut flat = 0;
            for k in 0..dims {
                let up = (corner >> k) & 1;
                weight *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axes[k].len() + lower[k] + up;
            }
            if weight != 0.0 {
                total += weight * self.values[flat];
            }
        }
        total
    }
}
