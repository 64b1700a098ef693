//! Python module `rhedge`.

use nalgebra::DVector;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use reflection_hedge::config::{ModelConfig, Setup};
use reflection_hedge::hedge::{self, HedgeReport};
use reflection_hedge::mc::DEFAULT_SEED;
use reflection_hedge::{
    canonicalize_to_chamber, generate_group, linalg, mc_survival, reflection, Error, FundamentalSystem, HedgePortfolio,
    KilledKernel, McConfig, PayoffSpec, QuadratureSpec, ReflectionGroup,
};

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vector(v: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(v)
}

fn payoff(text: &str) -> PyResult<PayoffSpec> {
    text.parse().map_err(err)
}

fn mc_config(paths: usize, steps: Option<usize>, seed: u64, antithetic: bool, discount: bool) -> McConfig {
    McConfig {
        steps,
        seed,
        antithetic,
        discount,
        ..McConfig::with_paths(paths)
    }
}

/// A fundamental system together with its finite reflection group.
#[pyclass(name = "RootSystem", frozen)]
struct PyRootSystem {
    kernel: KilledKernel,
}

impl PyRootSystem {
    fn fs(&self) -> &FundamentalSystem {
        self.kernel.fundamental()
    }

    fn group(&self) -> &ReflectionGroup {
        self.kernel.group()
    }
}

#[pymethods]
impl PyRootSystem {
    /// Build from a name such as `"A2"` or `"I2(5)"`, or from explicit simple roots.
    #[new]
    #[pyo3(signature = (name=None, roots=None, max_order=reflection::DEFAULT_MAX_ORDER))]
    fn new(name: Option<&str>, roots: Option<Vec<Vec<f64>>>, max_order: usize) -> PyResult<Self> {
        let fs = match (name, roots) {
            (Some(n), None) => FundamentalSystem::from_name(n),
            (None, Some(r)) => {
                let dim = r.first().map_or(0, Vec::len);
                FundamentalSystem::new(dim, r.into_iter().map(vector).collect())
            }
            _ => return Err(PyValueError::new_err("give exactly one of name or roots")),
        }
        .map_err(err)?;
        let group = generate_group(&fs, max_order).map_err(err)?;
        let kernel = KilledKernel::new(&fs, &group).map_err(err)?;
        Ok(PyRootSystem { kernel })
    }

    #[getter]
    fn name(&self) -> String {
        self.fs().name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.fs().dim()
    }

    #[getter]
    fn order(&self) -> usize {
        self.group().order()
    }

    /// `(word, sign)` for every group element.
    fn elements(&self) -> Vec<(Vec<usize>, f64)> {
        self.group().elements().iter().map(|w| (w.word.clone(), w.sign)).collect()
    }

    /// The group element mapping `x` into the chamber, and the image.
    fn canonicalize(&self, x: Vec<f64>) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let (w, y) = canonicalize_to_chamber(self.fs(), self.group(), &vector(x)).map_err(err)?;
        Ok((w.word, y.iter().copied().collect()))
    }

    fn killed_density(&self, t: f64, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.kernel.density(t, &vector(x), &vector(y)).map_err(err)
    }

    /// `(probability, stderr)`; the error is zero for grid quadrature.
    #[pyo3(signature = (t, x, points=400, seed=DEFAULT_SEED))]
    fn survival_probability(&self, t: f64, x: Vec<f64>, points: usize, seed: u64) -> PyResult<(f64, f64)> {
        let quad = QuadratureSpec {
            points_per_axis: points,
            seed,
            ..QuadratureSpec::default()
        };
        let e = self.kernel.survival_probability(t, &vector(x), &quad).map_err(err)?;
        Ok((e.value, e.std_error))
    }

    #[pyo3(signature = (t, x, paths=100_000, steps=512, seed=DEFAULT_SEED))]
    fn mc_survival(&self, t: f64, x: Vec<f64>, paths: usize, steps: usize, seed: u64) -> PyResult<(f64, f64)> {
        let e = mc_survival(self.fs(), t, &vector(x), paths, steps, seed).map_err(err)?;
        Ok((e.value, e.std_error))
    }
}

#[pyclass(name = "HedgeReport", frozen, get_all)]
struct PyHedgeReport {
    lhs: f64,
    rhs: f64,
    stderr_lhs: f64,
    stderr_rhs: f64,
    vanilla: f64,
    allowance: f64,
    z: f64,
    passed: bool,
}

impl From<HedgeReport> for PyHedgeReport {
    fn from(r: HedgeReport) -> Self {
        PyHedgeReport {
            lhs: r.lhs,
            rhs: r.rhs,
            stderr_lhs: r.stderr_lhs,
            stderr_rhs: r.stderr_rhs,
            vanilla: r.vanilla,
            allowance: r.allowance,
            z: r.z,
            passed: r.pass,
        }
    }
}

#[pymethods]
impl PyHedgeReport {
    fn __repr__(&self) -> String {
        format!(
            "HedgeReport(lhs={}, rhs={}, z={}, passed={})",
            self.lhs,
            self.rhs,
            self.z,
            if self.passed { "True" } else { "False" }
        )
    }
}

/// Market model plus cone barrier, built from a JSON configuration.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    setup: Setup,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let setup = ModelConfig::from_json(text).and_then(|c| c.build()).map_err(err)?;
        Ok(PyModel { setup })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let setup = ModelConfig::load(path).and_then(|c| c.build()).map_err(err)?;
        Ok(PyModel { setup })
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        linalg::to_rows(&self.setup.barrier.c)
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.setup.barrier.mu.iter().copied().collect()
    }

    #[getter]
    fn h(&self) -> Vec<f64> {
        self.setup.barrier.h.iter().copied().collect()
    }

    #[getter]
    fn group_order(&self) -> usize {
        self.setup.group.order()
    }

    /// Knock-out price `(value, stderr)` by bridge-corrected path simulation.
    #[pyo3(signature = (payoff, maturity, paths=100_000, steps=None, seed=DEFAULT_SEED, antithetic=false, discount=false))]
    #[allow(clippy::too_many_arguments)]
    fn price_knockout(
        &self,
        payoff: &str,
        maturity: f64,
        paths: usize,
        steps: Option<usize>,
        seed: u64,
        antithetic: bool,
        discount: bool,
    ) -> PyResult<(f64, f64)> {
        let spec = self::payoff(payoff)?;
        spec.validate(self.setup.barrier.m()).map_err(err)?;
        let cfg = mc_config(paths, steps, seed, antithetic, discount);
        let e = reflection_hedge::price_knockout_mc(&self.setup.model, &self.setup.barrier, &spec, maturity, &cfg)
            .map_err(err)?;
        Ok((e.value, e.std_error))
    }

    fn hedge(&self, payoff: &str, maturity: f64) -> PyResult<PyPortfolio> {
        let s = &self.setup;
        let inner = reflection_hedge::build_portfolio(&s.barrier, &s.group, &self::payoff(payoff)?, &s.label, maturity)
            .map_err(err)?;
        Ok(PyPortfolio { inner })
    }

    #[pyo3(signature = (payoff, maturity, paths=100_000, steps=None, seed=DEFAULT_SEED))]
    fn verify(&self, payoff: &str, maturity: f64, paths: usize, steps: Option<usize>, seed: u64) -> PyResult<PyHedgeReport> {
        let s = &self.setup;
        let cfg = mc_config(paths, steps, seed, false, false);
        let r = reflection_hedge::verify_hedge_identity(&s.model, &s.barrier, &s.group, &self::payoff(payoff)?, maturity, &cfg)
            .map_err(err)?;
        Ok(r.into())
    }
}

/// Replicating portfolio of European claims.
#[pyclass(name = "Portfolio", frozen)]
struct PyPortfolio {
    inner: HedgePortfolio,
}

#[pymethods]
impl PyPortfolio {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyPortfolio {
            inner: HedgePortfolio::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.terms.len()
    }

    fn sign_sum(&self) -> f64 {
        self.inner.sign_sum()
    }

    /// `(word, sign)` of each term.
    fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        self.inner.terms.iter().map(|t| (t.word.clone(), t.sign)).collect()
    }

    /// Portfolio payoff at log prices of all assets (riskless first).
    fn evaluate(&self, log_s: Vec<f64>) -> f64 {
        self.inner.evaluate(&log_s)
    }

    /// Price `(value, stderr)` by exact terminal sampling.
    #[pyo3(signature = (model, maturity, paths=100_000, seed=DEFAULT_SEED, antithetic=false, discount=false))]
    fn price(
        &self,
        model: &PyModel,
        maturity: f64,
        paths: usize,
        seed: u64,
        antithetic: bool,
        discount: bool,
    ) -> PyResult<(f64, f64)> {
        let cfg = mc_config(paths, None, seed, antithetic, discount);
        let e = reflection_hedge::price_portfolio_mc(&model.setup.model, &self.inner, maturity, &cfg).map_err(err)?;
        Ok((e.value, e.std_error))
    }
}

/// One-asset case: returns `(exponent, expected_exponent, martingale_exponent, report)`.
#[pyfunction]
#[pyo3(signature = (sigma, r, spot, level, strike, maturity, paths=100_000, seed=DEFAULT_SEED))]
#[allow(clippy::too_many_arguments)]
fn put_call_symmetry(
    sigma: f64,
    r: f64,
    spot: f64,
    level: f64,
    strike: f64,
    maturity: f64,
    paths: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64, PyHedgeReport)> {
    let cfg = mc_config(paths, None, seed, false, false);
    let rep = hedge::put_call_symmetry_case(sigma, r, spot, level, strike, maturity, &cfg).map_err(err)?;
    Ok((rep.exponent, rep.expected_exponent, rep.martingale_exponent, rep.identity.into()))
}

#[pymodule]
fn rhedge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRootSystem>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyPortfolio>()?;
    m.add_class::<PyHedgeReport>()?;
    m.add_function(wrap_pyfunction!(put_call_symmetry, m)?)?;
    Ok(())
}
