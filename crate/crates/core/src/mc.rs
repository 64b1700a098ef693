//! Block-parallel Monte Carlo driver with reproducible substreams.
//!
//! Samples are grouped in fixed-size blocks. Block `b` draws from a ChaCha8
//! generator seeded with the run seed and switched to stream `b`, so sample
//! `i` always belongs to substream `i / block_size` regardless of how many
//! threads run. Block results are combined by a fixed pairwise tree over the
//! block order, which makes estimates bit-stable for a given
//! `(seed, n_samples, block_size)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type McRng = ChaCha8Rng;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_BLOCK_SIZE: usize = 4096;
/// Default time steps per unit of maturity for path simulation.
pub const DEFAULT_STEPS_PER_UNIT_TIME: usize = 512;
/// Discretization allowance as a fraction of the vanilla price.
pub const DEFAULT_ALLOWANCE_FRACTION: f64 = 0.002;

pub fn substream(seed: u64, block: u64) -> McRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Running mean and sum of squared deviations (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Stats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean,
            std_error: self.std_error(),
            samples: self.n,
        }
    }
}

/// Accumulators that can be combined across blocks.
pub trait Merge: Send {
    fn merge(self, other: Self) -> Self;
}

impl Merge for Stats {
    fn merge(self, other: Self) -> Self {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Stats { n, mean, m2 }
    }
}

impl<A: Merge, B: Merge> Merge for (A, B) {
    fn merge(self, other: Self) -> Self {
        (self.0.merge(other.0), self.1.merge(other.1))
    }
}

impl<T: Send> Merge for Vec<T> {
    fn merge(mut self, mut other: Self) -> Self {
        self.append(&mut other);
        self
    }
}

/// Point estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn scaled(self, factor: f64) -> Self {
        Estimate {
            value: self.value * factor,
            std_error: self.std_error * factor.abs(),
            samples: self.samples,
        }
    }
}

/// Runs `block_fn(rng, first_sample, count)` over all blocks and tree-reduces the results.
pub fn run_blocks<A, F>(n_samples: usize, block_size: usize, seed: u64, block_fn: F) -> A
where
    A: Merge + Default,
    F: Fn(&mut McRng, usize, usize) -> A + Sync,
{
    let block_size = block_size.max(1);
    let n_blocks = n_samples.div_ceil(block_size);
    let parts: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * block_size;
            let count = block_size.min(n_samples - start);
            let mut rng = substream(seed, b as u64);
            block_fn(&mut rng, start, count)
        })
        .collect();
    tree_reduce(parts)
}

fn tree_reduce<A: Merge + Default>(mut parts: Vec<A>) -> A {
    if parts.is_empty() {
        return A::default();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Monte Carlo settings shared by the simulation engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    /// Total time steps for path simulation; `None` uses 512 per unit maturity.
    pub steps: Option<usize>,
    pub seed: u64,
    pub bridge: bool,
    pub antithetic: bool,
    pub block_size: usize,
    /// Multiply reported prices by `exp(-rT)`.
    pub discount: bool,
    pub allowance_fraction: f64,
    /// When set, the allowance is scaled by `reference_steps / steps`.
    pub convergence_reference_steps: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 100_000,
            steps: None,
            seed: DEFAULT_SEED,
            bridge: true,
            antithetic: false,
            block_size: DEFAULT_BLOCK_SIZE,
            discount: false,
            allowance_fraction: DEFAULT_ALLOWANCE_FRACTION,
            convergence_reference_steps: None,
        }
    }
}

impl McConfig {
    pub fn with_paths(paths: usize) -> Self {
        McConfig {
            paths,
            ..Default::default()
        }
    }

    pub fn steps_for(&self, maturity: f64) -> usize {
        self.steps
            .unwrap_or_else(|| (DEFAULT_STEPS_PER_UNIT_TIME as f64 * maturity).ceil() as usize)
            .max(1)
    }

    pub fn allowance(&self, vanilla: f64, maturity: f64) -> f64 {
        let base = self.allowance_fraction * vanilla.abs();
        match self.convergence_reference_steps {
            Some(reference) => base * reference as f64 / self.steps_for(maturity) as f64,
            None => base,
        }
    }
}
