//! Semi-static replication of cone-barrier knock-out options.
//!
//! For every group element `w` the portfolio holds the European claim
//!
//! ```text
//! ε(w) f(H S_T^{C_w} / H^{T_w}) · S_T^{x'ᵀ C} / H^{x'} · 1{S_T^{C_w} > H^{T_w}},   C_w = T_w C,
//! ```
//!
//! where `x'` solves `Σ'ᵀ x' = w⁻¹(μ) - μ`. Holding the sum until the barrier
//! is hit replicates `f(S_T^C) 1{τ > T}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::market::{self, ConeBarrier, MarketModel, PathSimulator, TerminalSampler, GROUP_TOL};
use crate::mc::{self, Estimate, McConfig, Stats};
use crate::payoff::PayoffSpec;
use crate::reflection::{generate_group, FundamentalSystem, ReflectionGroup, DEFAULT_MAX_ORDER};

pub const VERSION: &str = concat!("reflection-hedge ", env!("CARGO_PKG_VERSION"));

/// Offset applied to the seed of the terminal-sampling side so the two
/// pricers draw from independent streams.
pub const PORTFOLIO_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// One signed European claim of the replicating portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeTerm {
    /// Generator word of `w`.
    pub word: Vec<usize>,
    /// `ε(w)`.
    pub sign: f64,
    /// `C_w = T_w C`, `m x (n+1)`.
    pub c_w: Vec<Vec<f64>>,
    pub t_w: Vec<Vec<f64>>,
    /// `H^{T_w}`.
    pub barrier_level: Vec<f64>,
    /// Exponent vector of the power weight.
    pub x_w: Vec<f64>,
    /// `x_wᵀ C`, the weight exponents on the assets.
    pub weight_row: Vec<f64>,
    /// `H^{-x_w}`.
    pub weight_scale: f64,
}

impl HedgeTerm {
    /// Payoff of this term at terminal log prices `log_s`; `arg` is scratch of length `m`.
    pub fn evaluate(&self, payoff: &PayoffSpec, levels: &[f64], log_s: &[f64], arg: &mut [f64]) -> f64 {
        for (i, row) in self.c_w.iter().enumerate() {
            let e: f64 = row.iter().zip(log_s).map(|(c, l)| c * l).sum();
            let s_cw = e.exp();
            if !(s_cw > self.barrier_level[i]) {
                return 0.0;
            }
            arg[i] = levels[i] * s_cw / self.barrier_level[i];
        }
        let log_weight: f64 = self.weight_row.iter().zip(log_s).map(|(x, l)| x * l).sum();
        self.sign * payoff.evaluate(arg) * log_weight.exp() * self.weight_scale
    }

    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgePortfolio {
    pub version: String,
    pub system: String,
    /// Barrier levels `H`.
    pub levels: Vec<f64>,
    pub maturity: f64,
    /// Exponent matrix `C` of the knocked-out claim.
    pub c: Vec<Vec<f64>>,
    pub payoff: PayoffSpec,
    pub terms: Vec<HedgeTerm>,
}

impl HedgePortfolio {
    pub fn m(&self) -> usize {
        self.levels.len()
    }

    pub fn n_assets(&self) -> usize {
        self.c.first().map_or(0, Vec::len)
    }

    /// Sum of all terms at terminal log prices `log_s`.
    pub fn evaluate(&self, log_s: &[f64]) -> f64 {
        let mut arg = vec![0.0; self.m()];
        self.evaluate_with(log_s, &mut arg)
    }

    fn evaluate_with(&self, log_s: &[f64], arg: &mut [f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.evaluate(&self.payoff, &self.levels, log_s, arg))
            .sum()
    }

    /// `f(S_T^C)` without any barrier.
    pub fn vanilla(&self, log_s: &[f64], arg: &mut [f64]) -> f64 {
        for (i, row) in self.c.iter().enumerate() {
            arg[i] = row.iter().zip(log_s).map(|(c, l)| c * l).sum::<f64>().exp();
        }
        self.payoff.evaluate(arg)
    }

    pub fn sign_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.sign).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: HedgePortfolio = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        let k = self.n_assets();
        if m == 0 || self.c.len() != m || self.terms.is_empty() {
            return Err(Error::Config("portfolio needs barrier levels, C and at least one term".into()));
        }
        self.payoff.validate(m)?;
        for t in &self.terms {
            let shapes_ok = t.c_w.len() == m
                && t.c_w.iter().all(|r| r.len() == k)
                && t.barrier_level.len() == m
                && t.weight_row.len() == k;
            if !shapes_ok {
                return Err(Error::Config(format!("term {:?} has inconsistent shapes", t.word)));
            }
        }
        Ok(())
    }
}

/// Builds one term per group element.
pub fn build_portfolio(
    barrier: &ConeBarrier,
    group: &ReflectionGroup,
    payoff: &PayoffSpec,
    system: &str,
    maturity: f64,
) -> Result<HedgePortfolio> {
    let m = barrier.m();
    payoff.validate(m)?;
    let log_h = barrier.log_levels();
    let mut terms = Vec::with_capacity(group.order());
    for (idx, w) in group.elements().iter().enumerate() {
        let t_w = market::representation_matrix(barrier, w)?;
        let c_w = &t_w * &barrier.c;
        // C_w Λ must equal C Λ w
        let residual = linalg::max_abs_diff(&(&t_w * &barrier.sigma_prime), &(&barrier.sigma_prime * &w.matrix));
        if residual > GROUP_TOL {
            return Err(Error::SpanNotInvariant {
                word: w.word.clone(),
                residual,
            });
        }
        // the Girsanov weight of the w-image uses w⁻¹(μ)
        let inv = group.inverse(idx).ok_or_else(|| Error::Geometry {
            message: format!("inverse of {:?} not found in the group", w.word),
            residual: f64::NAN,
        })?;
        let x_w = market::solve_xw(barrier, group.element(inv))?;
        let weight_row = barrier.c.transpose() * &x_w;
        let barrier_level = (&t_w * &log_h).map(f64::exp);
        terms.push(HedgeTerm {
            word: w.word.clone(),
            sign: w.sign,
            c_w: linalg::to_rows(&c_w),
            t_w: linalg::to_rows(&t_w),
            barrier_level: barrier_level.iter().copied().collect(),
            x_w: x_w.iter().copied().collect(),
            weight_row: weight_row.iter().copied().collect(),
            weight_scale: (-x_w.dot(&log_h)).exp(),
        });
    }
    Ok(HedgePortfolio {
        version: VERSION.to_string(),
        system: system.to_string(),
        levels: barrier.levels.iter().copied().collect(),
        maturity,
        c: linalg::to_rows(&barrier.c),
        payoff: payoff.clone(),
        terms,
    })
}

fn check_maturity(maturity: f64) -> Result<()> {
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(Error::domain(format!("maturity must be positive, got {maturity}")));
    }
    Ok(())
}

fn discount_factor(model: &MarketModel, maturity: f64, mc: &McConfig) -> f64 {
    if mc.discount {
        (-model.rate() * maturity).exp()
    } else {
        1.0
    }
}

/// Number of independent samples: antithetic pairs count once.
fn sample_count(mc: &McConfig) -> usize {
    if mc.antithetic {
        mc.paths.div_ceil(2)
    } else {
        mc.paths
    }
}

/// `E[f(S_T^C) 1{τ > T}]` by discretely monitored path simulation.
pub fn price_knockout_mc(
    model: &MarketModel,
    barrier: &ConeBarrier,
    payoff: &PayoffSpec,
    maturity: f64,
    mc: &McConfig,
) -> Result<Estimate> {
    check_maturity(maturity)?;
    let m = barrier.m();
    payoff.validate(m)?;
    let steps = mc.steps_for(maturity);
    let k = model.n_assets();
    let c_rows = linalg::to_rows(&barrier.c);
    let stats: Stats = mc::run_blocks(sample_count(mc), mc.block_size, mc.seed, |rng, _, count| {
        let mut sim = PathSimulator::new(model, barrier, maturity, steps, mc.bridge);
        let mut log_s = vec![0.0; k];
        let mut sc = vec![0.0; m];
        let mut s = Stats::default();
        let mut one = |rng: &mut mc::McRng, flip: bool| -> f64 {
            if !sim.run(rng, flip, false, &mut log_s) {
                return 0.0;
            }
            for (i, row) in c_rows.iter().enumerate() {
                sc[i] = row.iter().zip(&log_s).map(|(c, l)| c * l).sum::<f64>().exp();
            }
            payoff.evaluate(&sc)
        };
        for _ in 0..count {
            let v = if mc.antithetic {
                0.5 * (one(rng, false) + one(rng, true))
            } else {
                one(rng, false)
            };
            s.push(v);
        }
        s
    });
    Ok(stats.estimate().scaled(discount_factor(model, maturity, mc)))
}

/// Portfolio and vanilla prices from the same exact terminal samples.
pub fn price_portfolio_and_vanilla(
    model: &MarketModel,
    portfolio: &HedgePortfolio,
    maturity: f64,
    mc: &McConfig,
) -> Result<(Estimate, Estimate)> {
    check_maturity(maturity)?;
    portfolio.validate()?;
    if portfolio.n_assets() != model.n_assets() {
        return Err(Error::Config(format!(
            "portfolio is written on {} assets, the model has {}",
            portfolio.n_assets(),
            model.n_assets()
        )));
    }
    let k = model.n_assets();
    let m = portfolio.m();
    let seed = mc.seed.wrapping_add(PORTFOLIO_SEED_OFFSET);
    let (rhs, vanilla): (Stats, Stats) = mc::run_blocks(sample_count(mc), mc.block_size, seed, |rng, _, count| {
        let mut sampler = TerminalSampler::new(model, maturity);
        let mut log_s = vec![0.0; k];
        let mut arg = vec![0.0; m];
        let mut acc = (Stats::default(), Stats::default());
        for _ in 0..count {
            sampler.draw(rng);
            sampler.log_prices(false, &mut log_s);
            let mut p = portfolio.evaluate_with(&log_s, &mut arg);
            let mut v = portfolio.vanilla(&log_s, &mut arg);
            if mc.antithetic {
                sampler.log_prices(true, &mut log_s);
                p = 0.5 * (p + portfolio.evaluate_with(&log_s, &mut arg));
                v = 0.5 * (v + portfolio.vanilla(&log_s, &mut arg));
            }
            acc.0.push(p);
            acc.1.push(v);
        }
        acc
    });
    let df = discount_factor(model, maturity, mc);
    Ok((rhs.estimate().scaled(df), vanilla.estimate().scaled(df)))
}

/// Expectation of the replicating portfolio by exact terminal sampling.
pub fn price_portfolio_mc(
    model: &MarketModel,
    portfolio: &HedgePortfolio,
    maturity: f64,
    mc: &McConfig,
) -> Result<Estimate> {
    Ok(price_portfolio_and_vanilla(model, portfolio, maturity, mc)?.0)
}

/// Outcome of comparing the knock-out price with its replicating portfolio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub stderr_lhs: f64,
    pub stderr_rhs: f64,
    pub vanilla: f64,
    pub allowance: f64,
    pub z: f64,
    pub pass: bool,
}

impl HedgeReport {
    pub fn combined_stderr(&self) -> f64 {
        self.stderr_lhs.hypot(self.stderr_rhs)
    }

    pub const CSV_HEADER: &'static str = "lhs,rhs,stderr_lhs,stderr_rhs,z,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.lhs, self.rhs, self.stderr_lhs, self.stderr_rhs, self.z, self.pass
        )
    }
}

/// Compares `lhs` against `rhs`; passes when `|lhs - rhs| <= 3 σ + allowance`.
pub fn compare(lhs: Estimate, rhs: Estimate, allowance: f64, vanilla: f64) -> HedgeReport {
    let se = lhs.std_error.hypot(rhs.std_error);
    let diff = lhs.value - rhs.value;
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    HedgeReport {
        lhs: lhs.value,
        rhs: rhs.value,
        stderr_lhs: lhs.std_error,
        stderr_rhs: rhs.std_error,
        vanilla,
        allowance,
        z,
        pass: diff.abs() <= 3.0 * se + allowance,
    }
}

/// Prices both sides for a given (possibly modified) portfolio.
pub fn verify_portfolio(
    model: &MarketModel,
    barrier: &ConeBarrier,
    portfolio: &HedgePortfolio,
    maturity: f64,
    mc: &McConfig,
) -> Result<HedgeReport> {
    let lhs = price_knockout_mc(model, barrier, &portfolio.payoff, maturity, mc)?;
    let (rhs, vanilla) = price_portfolio_and_vanilla(model, portfolio, maturity, mc)?;
    Ok(compare(lhs, rhs, mc.allowance(vanilla.value, maturity), vanilla.value))
}

pub fn verify_hedge_identity(
    model: &MarketModel,
    barrier: &ConeBarrier,
    group: &ReflectionGroup,
    payoff: &PayoffSpec,
    maturity: f64,
    mc: &McConfig,
) -> Result<HedgeReport> {
    let portfolio = build_portfolio(barrier, group, payoff, "custom", maturity)?;
    verify_portfolio(model, barrier, &portfolio, maturity, mc)
}

/// One-asset reduction: the two-term portfolio is the classical put-call symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// Power on `S_T` in the reflected term.
    pub exponent: f64,
    /// `1 - 2r/σ²`.
    pub expected_exponent: f64,
    /// Exponent produced for the same volatility at `r = 0`.
    pub martingale_exponent: f64,
    /// Largest gap between the generated portfolio and the closed-form two-term claim.
    pub structure_error: f64,
    pub identity: HedgeReport,
    pub pass: bool,
}

pub fn one_asset_setup(
    sigma: f64,
    r: f64,
    spot: f64,
    level: f64,
) -> Result<(MarketModel, FundamentalSystem, ConeBarrier, ReflectionGroup)> {
    if !(sigma > 0.0) {
        return Err(Error::domain("volatility must be positive"));
    }
    let model = MarketModel::new(
        DMatrix::from_row_slice(2, 1, &[0.0, sigma]),
        r,
        DVector::from_vec(vec![1.0, spot]),
    )?;
    let fs = FundamentalSystem::orthogonal(1)?;
    // ν = σ makes C = [0, 1], so the barrier index is the asset itself
    let barrier = ConeBarrier::new(&model, &fs, &[sigma], &[level])?;
    let group = generate_group(&fs, DEFAULT_MAX_ORDER)?;
    Ok((model, fs, barrier, group))
}

#[allow(clippy::too_many_arguments)]
pub fn put_call_symmetry_case(
    sigma: f64,
    r: f64,
    spot: f64,
    level: f64,
    strike: f64,
    maturity: f64,
    mc: &McConfig,
) -> Result<SymmetryReport> {
    let payoff = PayoffSpec::Call { index: 0, strike };
    let (model, _, barrier, group) = one_asset_setup(sigma, r, spot, level)?;
    let portfolio = build_portfolio(&barrier, &group, &payoff, "orthogonal(1)", maturity)?;
    let reflected = portfolio
        .terms
        .iter()
        .find(|t| !t.is_identity())
        .ok_or_else(|| Error::Geometry {
            message: "one-asset group has no reflection".into(),
            residual: f64::NAN,
        })?;
    let exponent = reflected.weight_row[1];
    let expected_exponent = 1.0 - 2.0 * r / (sigma * sigma);

    let (_, _, b0, g0) = one_asset_setup(sigma, 0.0, spot, level)?;
    let p0 = build_portfolio(&b0, &g0, &payoff, "orthogonal(1)", maturity)?;
    let martingale_exponent = p0.terms.iter().find(|t| !t.is_identity()).map_or(f64::NAN, |t| t.weight_row[1]);

    let mut structure_error: f64 = 0.0;
    for i in 1..400 {
        let s = level * (0.25 + 1.5 * i as f64 / 400.0);
        let closed = if s > level {
            payoff.evaluate(&[s])
        } else if s < level {
            -payoff.evaluate(&[level * level / s]) * (s / level).powf(expected_exponent)
        } else {
            0.0
        };
        let generated = portfolio.evaluate(&[0.0, s.ln()]);
        structure_error = structure_error.max((generated - closed).abs() / (1.0 + closed.abs()));
    }

    let identity = verify_portfolio(&model, &barrier, &portfolio, maturity, mc)?;
    let pass = (exponent - expected_exponent).abs() <= 1e-12
        && (martingale_exponent - 1.0).abs() <= 1e-12
        && structure_error <= 1e-12
        && identity.pass;
    Ok(SymmetryReport {
        exponent,
        expected_exponent,
        martingale_exponent,
        structure_error,
        identity,
        pass,
    })
}
