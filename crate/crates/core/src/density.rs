//! Transition density of Brownian motion killed on the walls of a chamber,
//! built as a signed sum of free Gaussian kernels over the group images.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mc::{self, Estimate, Stats};
use crate::reflection::{FundamentalSystem, ReflectionGroup};

/// Gaussian mass beyond this many standard deviations is dropped.
pub const TRUNCATION_SIGMAS: f64 = 8.0;
const NODES_PER_PANEL: usize = 20;
/// Largest chamber dimension handled by tensor-grid quadrature.
pub const MAX_GRID_DIM: usize = 3;

/// Free heat kernel `(2πt)^{-d/2} exp(-|y-x|²/2t)`.
pub fn gaussian_kernel(t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be positive, got {t}")));
    }
    if x.len() != y.len() {
        return Err(Error::domain("kernel arguments have different dimensions"));
    }
    Ok(kernel_unchecked(t, x.len(), (y - x).norm_squared()))
}

#[inline]
fn kernel_unchecked(t: f64, d: usize, dist2: f64) -> f64 {
    (2.0 * PI * t).powf(-(d as f64) / 2.0) * (-dist2 / (2.0 * t)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub points_per_axis: usize,
    /// Sample count for the Monte Carlo fallback above `MAX_GRID_DIM`.
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            points_per_axis: 400,
            mc_samples: 1_000_000,
            seed: mc::DEFAULT_SEED,
        }
    }
}

/// Killed kernel `p̂_t(x, y) = Σ_w ε(w) p_t(x, w(y))` on the chamber of `fs`.
///
/// The group acts trivially on the orthogonal complement of `span Σ`, so
/// integrals over the chamber reduce to the `m`-dimensional span. In span
/// coordinates `u = A y` (rows of `A` the simple roots) the chamber is the
/// positive orthant, which is where the quadrature runs.
#[derive(Debug, Clone)]
pub struct KilledKernel {
    fs: FundamentalSystem,
    group: ReflectionGroup,
    /// Orthonormal basis of `span Σ` as rows (`m x d`).
    basis: DMatrix<f64>,
    /// Simple roots in span coordinates (`m x m`) and its inverse.
    span_roots: DMatrix<f64>,
    span_roots_inv: DMatrix<f64>,
    span_elements: Vec<(f64, DMatrix<f64>)>,
}

impl KilledKernel {
    pub fn new(fs: &FundamentalSystem, group: &ReflectionGroup) -> Result<Self> {
        if group.dim() != fs.dim() {
            return Err(Error::domain("group and fundamental system live in different dimensions"));
        }
        let roots = fs.root_matrix();
        let m = fs.rank();
        let svd = roots.clone().svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::LinearAlgebra {
            message: "SVD of the root matrix failed".into(),
            singular_values: linalg::singular_values(&roots),
        })?;
        let basis = v_t.rows(0, m).into_owned();
        let span_roots = &roots * basis.transpose();
        let span_roots_inv = span_roots.clone().try_inverse().ok_or_else(|| Error::LinearAlgebra {
            message: "simple roots are singular on their span".into(),
            singular_values: linalg::singular_values(&span_roots),
        })?;
        let span_elements = group
            .elements()
            .iter()
            .map(|w| (w.sign, &basis * &w.matrix * basis.transpose()))
            .collect();
        Ok(KilledKernel {
            fs: fs.clone(),
            group: group.clone(),
            basis,
            span_roots,
            span_roots_inv,
            span_elements,
        })
    }

    pub fn fundamental(&self) -> &FundamentalSystem {
        &self.fs
    }

    pub fn group(&self) -> &ReflectionGroup {
        &self.group
    }

    fn check_closed_chamber(&self, p: &DVector<f64>, what: &str) -> Result<()> {
        if p.len() != self.fs.dim() {
            return Err(Error::domain(format!(
                "{what} has {} entries, expected {}",
                p.len(),
                self.fs.dim()
            )));
        }
        // rounding can put a point meant to lie on a wall just outside it
        let slack = 1e-12 * p.norm();
        if self.fs.roots().iter().any(|a| p.dot(a) < -slack * a.norm()) {
            return Err(Error::domain(format!("{what} lies outside the closed chamber")));
        }
        Ok(())
    }

    /// `Σ_w ε(w) p_t(x, w(y))` for `x, y` in the closed chamber.
    pub fn density(&self, t: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be positive, got {t}")));
        }
        self.check_closed_chamber(x, "x")?;
        self.check_closed_chamber(y, "y")?;
        let d = self.fs.dim();
        Ok(self
            .group
            .elements()
            .iter()
            .map(|w| w.sign * kernel_unchecked(t, d, (w.apply(y) - x).norm_squared()))
            .sum())
    }

    /// The killed density restricted to `span Σ` (span coordinates).
    fn span_density(&self, t: f64, xs: &DVector<f64>, ys: &DVector<f64>) -> f64 {
        let m = xs.len();
        self.span_elements
            .iter()
            .map(|(sign, w)| sign * kernel_unchecked(t, m, (w * ys - xs).norm_squared()))
            .sum()
    }

    /// Upper bounds in `u_i = <y, α_i>` coordinates covering `|y - x| <= 8√t`.
    pub fn truncation_bounds(&self, x: &DVector<f64>, t: f64) -> Vec<f64> {
        self.fs
            .roots()
            .iter()
            .map(|a| x.dot(a).max(0.0) + TRUNCATION_SIGMAS * t.sqrt() * a.norm())
            .collect()
    }

    /// Tensor Gauss-Legendre integral of `f` over the truncated chamber
    /// `{0 < <y, α_i> <= upper[i]}`. Requires the chamber to span `R^d`.
    pub fn integrate_chamber<F>(&self, upper: &[f64], points_per_axis: usize, f: F) -> Result<f64>
    where
        F: Fn(&DVector<f64>) -> f64,
    {
        if self.fs.rank() != self.fs.dim() {
            return Err(Error::domain("full-space chamber integration needs m = d"));
        }
        let to_full = self.basis.transpose() * &self.span_roots_inv;
        self.integrate_orthant(upper, points_per_axis, |u| f(&(&to_full * u)))
    }

    fn integrate_orthant<F>(&self, upper: &[f64], points_per_axis: usize, f: F) -> Result<f64>
    where
        F: Fn(&DVector<f64>) -> f64,
    {
        let m = self.fs.rank();
        if upper.len() != m {
            return Err(Error::domain("one upper bound per simple root is required"));
        }
        if m > MAX_GRID_DIM {
            return Err(Error::domain(format!(
                "grid quadrature supports at most {MAX_GRID_DIM} dimensions"
            )));
        }
        let panels = (points_per_axis / NODES_PER_PANEL).max(1);
        let rules: Vec<(Vec<f64>, Vec<f64>)> = upper
            .iter()
            .map(|&b| linalg::composite_rule(0.0, b, panels, NODES_PER_PANEL))
            .collect();
        let jacobian = self.span_roots_inv.determinant().abs();
        let n = rules[0].0.len();
        let total = n.pow(m as u32);
        let mut u = DVector::zeros(m);
        let mut sum = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut weight = jacobian;
            for (k, (nodes, weights)) in rules.iter().enumerate() {
                let i = rem % n;
                rem /= n;
                u[k] = nodes[i];
                weight *= weights[i];
            }
            sum += weight * f(&u);
        }
        Ok(sum)
    }

    /// `P_x(T_C > t)`, the integral of the killed density over the chamber.
    pub fn survival_probability(&self, t: f64, x: &DVector<f64>, quad: &QuadratureSpec) -> Result<Estimate> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be positive, got {t}")));
        }
        if !self.fs.chamber_contains(x) {
            return Err(Error::domain("starting point must lie inside the open chamber"));
        }
        let xs = &self.basis * x;
        if self.fs.rank() <= MAX_GRID_DIM {
            let upper = self.truncation_bounds(x, t);
            let value = self.integrate_orthant(&upper, quad.points_per_axis, |u| {
                self.span_density(t, &xs, &(&self.span_roots_inv * u))
            })?;
            return Ok(Estimate {
                value,
                std_error: 0.0,
                samples: 0,
            });
        }
        // importance sampling from the free kernel: E[p̂/p · 1_C]
        let m = self.fs.rank();
        let sqrt_t = t.sqrt();
        let stats: Stats = mc::run_blocks(quad.mc_samples, mc::DEFAULT_BLOCK_SIZE, quad.seed, |rng, _, count| {
            let mut s = Stats::default();
            let mut ys = DVector::zeros(m);
            for _ in 0..count {
                for k in 0..m {
                    ys[k] = xs[k] + sqrt_t * rng.sample::<f64, _>(StandardNormal);
                }
                let inside = (&self.span_roots * &ys).iter().all(|&g| g > 0.0);
                let ratio = if inside {
                    let free = kernel_unchecked(t, m, (&ys - &xs).norm_squared());
                    self.span_density(t, &xs, &ys) / free
                } else {
                    0.0
                };
                s.push(ratio);
            }
            s
        });
        Ok(stats.estimate())
    }
}

/// Survival frequency of discretely monitored Brownian paths started at `x`,
/// with a per-wall Brownian-bridge crossing correction.
///
/// Between grid points a path is killed at wall `i` with probability
/// `exp(-2 d₁ d₂ / Δt)`, where `d₁, d₂` are the distances to the wall at the
/// two ends of the step. Walls are treated independently; the product of
/// their survival probabilities is accumulated along the path and resolved
/// with one uniform draw at the end.
pub fn mc_survival(
    fs: &FundamentalSystem,
    t: f64,
    x: &DVector<f64>,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(t > 0.0) || n_paths == 0 || n_steps == 0 {
        return Err(Error::domain("need t > 0 and at least one path and step"));
    }
    if x.len() != fs.dim() {
        return Err(Error::domain("starting point has the wrong dimension"));
    }
    let d = fs.dim();
    let units: Vec<DVector<f64>> = fs.roots().iter().map(|a| a.normalize()).collect();
    let start: Vec<f64> = units.iter().map(|a| x.dot(a)).collect();
    let dt = t / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let stats: Stats = mc::run_blocks(n_paths, mc::DEFAULT_BLOCK_SIZE, seed, |rng, _, count| {
        let mut s = Stats::default();
        let mut z = vec![0.0; d];
        let mut dist = start.clone();
        for _ in 0..count {
            dist.copy_from_slice(&start);
            let mut alive = dist.iter().all(|&g| g > 0.0);
            let mut log_survive = 0.0;
            for _ in 0..n_steps {
                if !alive {
                    break;
                }
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                for (g, a) in dist.iter_mut().zip(&units) {
                    let step: f64 = a.iter().zip(&z).map(|(ai, zi)| ai * zi).sum();
                    let next = *g + sqrt_dt * step;
                    if next <= 0.0 {
                        alive = false;
                        break;
                    }
                    log_survive += (-(-2.0 * *g * next / dt).exp()).ln_1p();
                    *g = next;
                }
            }
            let u: f64 = rng.random();
            s.push(if alive && u < log_survive.exp() { 1.0 } else { 0.0 });
        }
        s
    });
    let p = stats.mean;
    Ok(Estimate {
        value: p,
        std_error: (p * (1.0 - p) / n_paths as f64).sqrt(),
        samples: stats.n,
    })
}
