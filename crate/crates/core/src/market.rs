//! Multi-asset Black-Scholes economy and the cone barrier tied to a root system.
//!
//! Prices follow `S_t^i = S_0^i exp((Λ B_t)_i + (r - ½(ΛΛᵀ)_ii) t)` with row 0
//! of `Λ` zero (the riskless asset). A barrier `C` with levels `H` survives
//! while `S_t^C > H` componentwise, which in Brownian coordinates
//! `X_t = h + B_t + μ t` reads `Σ' X_t > 0`, with `Σ' = C Λ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mc::{self, McRng};
use crate::reflection::{FundamentalSystem, GroupElement};

/// Residual tolerance for the small linear solves.
pub const SOLVE_TOL: f64 = 1e-10;
/// Residual tolerance for quantities derived from group elements.
pub const GROUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketModel {
    lambda: DMatrix<f64>,
    r: f64,
    s0: DVector<f64>,
}

impl MarketModel {
    pub fn new(lambda: DMatrix<f64>, r: f64, s0: DVector<f64>) -> Result<Self> {
        let (rows, d) = lambda.shape();
        if rows < 2 || d == 0 {
            return Err(Error::domain("volatility matrix needs a riskless row and at least one risky asset"));
        }
        if d > rows - 1 {
            return Err(Error::domain(format!(
                "Brownian dimension {d} exceeds the number of risky assets {}",
                rows - 1
            )));
        }
        if lambda.row(0).iter().any(|&v| v != 0.0) {
            return Err(Error::domain("row 0 of the volatility matrix must be zero (riskless asset)"));
        }
        if lambda.iter().any(|v| !v.is_finite()) || !r.is_finite() {
            return Err(Error::domain("model parameters must be finite"));
        }
        if s0.len() != rows {
            return Err(Error::domain(format!("spot vector has {} entries, expected {rows}", s0.len())));
        }
        if s0.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::domain("spots must be strictly positive"));
        }
        let risky = lambda.rows(1, rows - 1).into_owned();
        if linalg::rank(&risky) < d {
            return Err(Error::LinearAlgebra {
                message: format!("volatility matrix must have rank {d}"),
                singular_values: linalg::singular_values(&risky),
            });
        }
        Ok(MarketModel { lambda, r, s0 })
    }

    /// Number of risky assets `n`.
    pub fn n_risky(&self) -> usize {
        self.lambda.nrows() - 1
    }

    pub fn n_assets(&self) -> usize {
        self.lambda.nrows()
    }

    /// Brownian dimension `d`.
    pub fn brownian_dim(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn rate(&self) -> f64 {
        self.r
    }

    pub fn spot(&self) -> &DVector<f64> {
        &self.s0
    }

    pub fn with_spot(&self, s0: DVector<f64>) -> Result<Self> {
        Self::new(self.lambda.clone(), self.r, s0)
    }

    /// `r 1 - ½ diag(ΛΛᵀ)`.
    pub fn log_drift(&self) -> DVector<f64> {
        DVector::from_fn(self.n_assets(), |i, _| self.r - 0.5 * self.lambda.row(i).norm_squared())
    }

    pub fn log_spot(&self) -> DVector<f64> {
        self.s0.map(f64::ln)
    }

    /// Log prices at time `t` given the Brownian value `b`.
    pub fn log_prices(&self, t: f64, b: &DVector<f64>) -> DVector<f64> {
        self.log_spot() + &self.lambda * b + self.log_drift() * t
    }
}

/// `(v^M)_i = Π_j v_j^{M_ij}`, computed as `exp(M log v)`.
pub fn vec_pow(v: &DVector<f64>, m: &DMatrix<f64>) -> DVector<f64> {
    (m * v.map(f64::ln)).map(f64::exp)
}

/// `C = Σ' Λ⁺` where row `i` of `Σ'` is `ν_i α_i`.
pub fn solve_c(model: &MarketModel, fs: &FundamentalSystem, nu: &[f64]) -> Result<DMatrix<f64>> {
    let m = fs.rank();
    if fs.dim() != model.brownian_dim() {
        return Err(Error::domain(format!(
            "root system lives in R^{} but the model has {} Brownian factors",
            fs.dim(),
            model.brownian_dim()
        )));
    }
    if nu.len() != m {
        return Err(Error::domain(format!("need {m} scalings nu, got {}", nu.len())));
    }
    if nu.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("scalings nu must be strictly positive"));
    }
    let sigma_prime = scaled_roots(fs, nu);
    let left_inverse = linalg::pinv_full_rank(model.lambda(), "volatility matrix")?;
    let c = &sigma_prime * left_inverse;
    let residual = (&c * model.lambda() - &sigma_prime).norm();
    if residual > SOLVE_TOL {
        return Err(Error::Geometry {
            message: "C Λ does not reproduce the scaled roots".into(),
            residual,
        });
    }
    if linalg::rank(&c) < m {
        return Err(Error::LinearAlgebra {
            message: "exponent matrix C is rank deficient".into(),
            singular_values: linalg::singular_values(&c),
        });
    }
    Ok(c)
}

fn scaled_roots(fs: &FundamentalSystem, nu: &[f64]) -> DMatrix<f64> {
    let mut sp = fs.root_matrix();
    for (i, &v) in nu.iter().enumerate() {
        sp.row_mut(i).scale_mut(v);
    }
    sp
}

/// Minimal-norm `μ` with `C Λ μ = C (r 1 - ½ diag ΛΛᵀ)`.
pub fn solve_mu(model: &MarketModel, c: &DMatrix<f64>) -> Result<DVector<f64>> {
    let rhs = c * model.log_drift();
    solve_in_span(&(c * model.lambda()), &rhs, "drift equation")
}

/// Minimal-norm `h` with `C Λ h = C log S_0 - log H`.
pub fn solve_h(model: &MarketModel, c: &DMatrix<f64>, levels: &[f64]) -> Result<DVector<f64>> {
    if levels.len() != c.nrows() {
        return Err(Error::domain(format!("need {} barrier levels, got {}", c.nrows(), levels.len())));
    }
    if levels.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::domain("barrier levels must be strictly positive"));
    }
    let log_h = DVector::from_iterator(levels.len(), levels.iter().map(|h| h.ln()));
    let rhs = c * model.log_spot() - log_h;
    solve_in_span(&(c * model.lambda()), &rhs, "offset equation")
}

fn solve_in_span(a: &DMatrix<f64>, rhs: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let (x, residual) = linalg::lstsq(a, rhs, what)?;
    if residual > SOLVE_TOL * (1.0 + rhs.norm()) {
        return Err(Error::Geometry {
            message: format!("{what} is inconsistent"),
            residual,
        });
    }
    Ok(x)
}

/// Knock-out region `{S^C > H}` together with its Brownian-coordinate data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBarrier {
    pub c: DMatrix<f64>,
    pub levels: DVector<f64>,
    pub nu: DVector<f64>,
    /// `Σ' = C Λ`, rows `ν_i α_i`.
    pub sigma_prime: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub h: DVector<f64>,
    sigma_prime_pinv: DMatrix<f64>,
    sigma_prime_t_pinv: DMatrix<f64>,
}

impl ConeBarrier {
    pub fn new(model: &MarketModel, fs: &FundamentalSystem, nu: &[f64], levels: &[f64]) -> Result<Self> {
        let c = solve_c(model, fs, nu)?;
        let mu = solve_mu(model, &c)?;
        let h = solve_h(model, &c, levels)?;
        let sigma_prime = scaled_roots(fs, nu);
        let sigma_prime_pinv = linalg::pinv_full_rank(&sigma_prime, "C Λ")?;
        let sigma_prime_t_pinv = linalg::pinv_full_rank(&sigma_prime.transpose(), "(C Λ)ᵀ")?;
        Ok(ConeBarrier {
            c,
            levels: DVector::from_vec(levels.to_vec()),
            nu: DVector::from_vec(nu.to_vec()),
            sigma_prime,
            mu,
            h,
            sigma_prime_pinv,
            sigma_prime_t_pinv,
        })
    }

    /// Same barrier for a model with a different spot: only `h` changes.
    pub fn with_spot(&self, model: &MarketModel) -> Result<Self> {
        let levels: Vec<f64> = self.levels.iter().copied().collect();
        let h = solve_h(model, &self.c, &levels)?;
        Ok(ConeBarrier { h, ..self.clone() })
    }

    pub fn m(&self) -> usize {
        self.c.nrows()
    }

    pub fn log_levels(&self) -> DVector<f64> {
        self.levels.map(f64::ln)
    }

    /// Whether `Σ' x > 0` componentwise, i.e. `x ∈ G`.
    pub fn in_cone(&self, x: &DVector<f64>) -> bool {
        (&self.sigma_prime * x).iter().all(|&g| g > 0.0)
    }

    /// Residual norms of the defining equations for `C`, `μ` and `h`.
    pub fn residuals(&self, model: &MarketModel) -> [f64; 3] {
        [
            (&self.c * model.lambda() - &self.sigma_prime).norm(),
            (&self.sigma_prime * &self.mu - &self.c * model.log_drift()).norm(),
            (&self.sigma_prime * &self.h - (&self.c * model.log_spot() - self.log_levels())).norm(),
        ]
    }
}

/// `T_w` with `C Λ w = T_w C Λ`.
pub fn representation_matrix(barrier: &ConeBarrier, w: &GroupElement) -> Result<DMatrix<f64>> {
    if w.is_identity() {
        let m = barrier.m();
        return Ok(DMatrix::identity(m, m));
    }
    let target = &barrier.sigma_prime * &w.matrix;
    let t_w = &target * &barrier.sigma_prime_pinv;
    let residual = (&t_w * &barrier.sigma_prime - target).norm();
    if residual > GROUP_TOL {
        return Err(Error::SpanNotInvariant {
            word: w.word.clone(),
            residual,
        });
    }
    Ok(t_w)
}

/// `x_w` with `Σ'ᵀ x_w = w(μ) - μ`.
pub fn solve_xw(barrier: &ConeBarrier, w: &GroupElement) -> Result<DVector<f64>> {
    if w.is_identity() {
        return Ok(DVector::zeros(barrier.m()));
    }
    let rhs = &w.matrix * &barrier.mu - &barrier.mu;
    let x = &barrier.sigma_prime_t_pinv * &rhs;
    let residual = (barrier.sigma_prime.transpose() * &x - &rhs).norm();
    if residual > GROUP_TOL * (1.0 + rhs.norm()) {
        return Err(Error::Geometry {
            message: format!("w(μ) - μ is not in the span of the roots for word {:?}", w.word),
            residual,
        });
    }
    Ok(x)
}

/// Exact terminal sampler for `log S_T`.
#[derive(Debug, Clone)]
pub(crate) struct TerminalSampler {
    scaled_lambda: DMatrix<f64>,
    mean: DVector<f64>,
    z: Vec<f64>,
}

impl TerminalSampler {
    pub(crate) fn new(model: &MarketModel, maturity: f64) -> Self {
        TerminalSampler {
            scaled_lambda: model.lambda() * maturity.sqrt(),
            mean: model.log_spot() + model.log_drift() * maturity,
            z: vec![0.0; model.brownian_dim()],
        }
    }

    pub(crate) fn draw(&mut self, rng: &mut McRng) {
        self.z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
    }

    /// Writes `log S_T` for the current normals, negated when `flip`.
    pub(crate) fn log_prices(&self, flip: bool, out: &mut [f64]) {
        let sgn = if flip { -1.0 } else { 1.0 };
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, z) in self.z.iter().enumerate() {
                acc += self.scaled_lambda[(i, j)] * z;
            }
            *o = self.mean[i] + sgn * acc;
        }
    }
}

/// `n_paths x (n+1)` matrix of exactly sampled terminal prices.
pub fn simulate_terminal(model: &MarketModel, maturity: f64, n_paths: usize, seed: u64) -> Result<DMatrix<f64>> {
    if !(maturity > 0.0) {
        return Err(Error::domain("maturity must be positive"));
    }
    let k = model.n_assets();
    let rows: Vec<f64> = mc::run_blocks(n_paths, mc::DEFAULT_BLOCK_SIZE, seed, |rng, _, count| {
        let mut sampler = TerminalSampler::new(model, maturity);
        let mut buf = vec![0.0; k];
        let mut out = Vec::with_capacity(count * k);
        for _ in 0..count {
            sampler.draw(rng);
            sampler.log_prices(false, &mut buf);
            out.extend(buf.iter().map(|v| v.exp()));
        }
        out
    });
    Ok(DMatrix::from_row_slice(n_paths, k, &rows))
}

/// Discretely monitored path of `X_t = h + B_t + μt` with optional bridge correction.
#[derive(Debug, Clone)]
pub(crate) struct PathSimulator {
    d: usize,
    m: usize,
    n_steps: usize,
    dt: f64,
    sqrt_dt: f64,
    bridge: bool,
    /// Rows of `Σ'` scaled to unit length, row-major `m x d`.
    unit_walls: Vec<f64>,
    /// Distance of `h` to each wall.
    start: Vec<f64>,
    /// Drift of the wall distances per step.
    drift_step: Vec<f64>,
    terminal_mean: DVector<f64>,
    lambda: DMatrix<f64>,
    z: Vec<f64>,
    bsum: Vec<f64>,
    dist: Vec<f64>,
}

impl PathSimulator {
    pub(crate) fn new(model: &MarketModel, barrier: &ConeBarrier, maturity: f64, n_steps: usize, bridge: bool) -> Self {
        let d = model.brownian_dim();
        let m = barrier.m();
        let dt = maturity / n_steps as f64;
        let norms: Vec<f64> = (0..m).map(|i| barrier.sigma_prime.row(i).norm()).collect();
        let mut unit_walls = Vec::with_capacity(m * d);
        for (i, norm) in norms.iter().enumerate() {
            for j in 0..d {
                unit_walls.push(barrier.sigma_prime[(i, j)] / norm);
            }
        }
        let g0 = &barrier.sigma_prime * &barrier.h;
        let gmu = &barrier.sigma_prime * &barrier.mu;
        PathSimulator {
            d,
            m,
            n_steps,
            dt,
            sqrt_dt: dt.sqrt(),
            bridge,
            unit_walls,
            start: (0..m).map(|i| g0[i] / norms[i]).collect(),
            drift_step: (0..m).map(|i| gmu[i] / norms[i] * dt).collect(),
            terminal_mean: model.log_spot() + model.log_drift() * maturity,
            lambda: model.lambda().clone(),
            z: vec![0.0; d],
            bsum: vec![0.0; d],
            dist: vec![0.0; m],
        }
    }

    /// Simulates one path and returns whether it survived. `log S_T` is
    /// written to `out` for survivors, and for killed paths too when `full`.
    pub(crate) fn run(&mut self, rng: &mut McRng, flip: bool, full: bool, out: &mut [f64]) -> bool {
        let sgn = if flip { -1.0 } else { 1.0 };
        self.bsum.iter_mut().for_each(|v| *v = 0.0);
        self.dist.copy_from_slice(&self.start);
        let mut alive = self.dist.iter().all(|&g| g > 0.0);
        let mut log_survive = 0.0;
        for _ in 0..self.n_steps {
            for (z, b) in self.z.iter_mut().zip(self.bsum.iter_mut()) {
                *z = sgn * rng.sample::<f64, _>(StandardNormal);
                *b += *z;
            }
            if !alive {
                if full {
                    continue;
                }
                return false;
            }
            for k in 0..self.m {
                let row = &self.unit_walls[k * self.d..(k + 1) * self.d];
                let step: f64 = row.iter().zip(&self.z).map(|(a, z)| a * z).sum();
                let prev = self.dist[k];
                let next = prev + self.drift_step[k] + self.sqrt_dt * step;
                self.dist[k] = next;
                if next <= 0.0 {
                    alive = false;
                } else if self.bridge {
                    log_survive += (-(-2.0 * prev * next / self.dt).exp()).ln_1p();
                }
            }
        }
        let u: f64 = rng.random();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..self.d {
                acc += self.lambda[(i, j)] * self.bsum[j];
            }
            *o = self.terminal_mean[i] + self.sqrt_dt * acc;
        }
        alive && u < log_survive.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub terminal: DVector<f64>,
    pub survived: bool,
}

/// Simulates `n_paths` paths to `maturity` and reports terminal prices and survival.
pub fn simulate_path_with_exit(
    model: &MarketModel,
    barrier: &ConeBarrier,
    maturity: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    bridge: bool,
) -> Result<Vec<PathOutcome>> {
    if !(maturity > 0.0) || n_steps == 0 {
        return Err(Error::domain("need a positive maturity and at least one step"));
    }
    let k = model.n_assets();
    Ok(mc::run_blocks(n_paths, mc::DEFAULT_BLOCK_SIZE, seed, |rng, _, count| {
        let mut sim = PathSimulator::new(model, barrier, maturity, n_steps, bridge);
        let mut buf = vec![0.0; k];
        (0..count)
            .map(|_| {
                let survived = sim.run(rng, false, true, &mut buf);
                PathOutcome {
                    terminal: DVector::from_iterator(k, buf.iter().map(|v| v.exp())),
                    survived,
                }
            })
            .collect::<Vec<_>>()
    }))
}

/// Full grid record of one path: times, Brownian coordinates and log prices.
#[derive(Debug, Clone)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub log_prices: Vec<DVector<f64>>,
}

/// Records a single path on a uniform grid (used for dumps and pathwise checks).
pub fn sample_path(
    model: &MarketModel,
    barrier: &ConeBarrier,
    maturity: f64,
    n_steps: usize,
    rng: &mut McRng,
) -> PathRecord {
    let d = model.brownian_dim();
    let dt = maturity / n_steps as f64;
    let mut b = DVector::zeros(d);
    let mut rec = PathRecord {
        times: Vec::with_capacity(n_steps + 1),
        x: Vec::with_capacity(n_steps + 1),
        log_prices: Vec::with_capacity(n_steps + 1),
    };
    for step in 0..=n_steps {
        let t = step as f64 * dt;
        if step > 0 {
            for j in 0..d {
                b[j] += dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
        }
        rec.times.push(t);
        rec.x.push(&barrier.h + &b + &barrier.mu * t);
        rec.log_prices.push(model.log_prices(t, &b));
    }
    rec
}
