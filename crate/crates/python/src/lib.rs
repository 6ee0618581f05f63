//! Python bindings for `jacobi_mimo`.
//!
//! Channels are passed as `(m, n, l, q)`; results come back as plain Python
//! numbers, lists and dicts.

use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use jacobi_mimo::analysis::{self, ReportOptions};
use jacobi_mimo::distributions::{self, CurveSet};
use jacobi_mimo::mgf::{self as exact, ChannelConfig, Cutoff, MgfEvaluator};
use jacobi_mimo::montecarlo;

fn to_py(e: jacobi_mimo::Error) -> PyErr {
    match e {
        jacobi_mimo::Error::Config(_) | jacobi_mimo::Error::Parameter(_) | jacobi_mimo::Error::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn channel(m: usize, n: usize, l: usize, q: Vec<f64>) -> PyResult<ChannelConfig> {
    ChannelConfig::new(m, n, l, q).map_err(to_py)
}

fn cutoff(value: Option<f64>) -> Cutoff {
    value.map_or(Cutoff::auto(), Cutoff::Fixed)
}

/// M(κ) = E[exp(iκI)].
#[pyfunction]
fn mgf(m: usize, n: usize, l: usize, q: Vec<f64>, kappa: f64) -> PyResult<Complex64> {
    exact::mgf_eval(&channel(m, n, l, q)?, kappa).map_err(to_py)
}

/// `(kappas, values)` on the symmetric inversion grid; `cutoff=None` picks L
/// automatically.
#[pyfunction]
#[pyo3(signature = (m, n, l, q, cutoff=None, dkappa=0.05))]
fn mgf_grid(
    m: usize,
    n: usize,
    l: usize,
    q: Vec<f64>,
    cutoff: Option<f64>,
    dkappa: f64,
) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
    let g = exact::mgf_grid(&channel(m, n, l, q)?, self::cutoff(cutoff), dkappa).map_err(to_py)?;
    Ok((g.kappas, g.values))
}

/// Raw moments, variance and skewness of I in nats.
#[pyfunction]
fn moments<'py>(py: Python<'py>, m: usize, n: usize, l: usize, q: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let s = exact::moments(&channel(m, n, l, q)?).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("mu1", s.mu1)?;
    d.set_item("mu2", s.mu2)?;
    d.set_item("mu3", s.mu3)?;
    d.set_item("sigma2", s.sigma2)?;
    d.set_item("skewness", s.skewness)?;
    Ok(d)
}

#[pyfunction]
fn ergodic_capacity(m: usize, n: usize, l: usize, q: Vec<f64>) -> PyResult<f64> {
    exact::ergodic_capacity(&channel(m, n, l, q)?).map_err(to_py)
}

/// Mutual-information samples from the truncated-Haar channel.
#[pyfunction]
#[pyo3(signature = (m, n, l, q, count, seed=2024))]
fn simulate(m: usize, n: usize, l: usize, q: Vec<f64>, count: usize, seed: u64) -> PyResult<Vec<f64>> {
    let ens = montecarlo::run_ensemble(&channel(m, n, l, q)?, count, seed).map_err(to_py)?;
    Ok(ens.samples().to_vec())
}

/// One distribution curve evaluated at `xs`.
///
/// `method` is `gaussian`, `weibull` or `fourier`; `kind` is `pdf`, `cdf`
/// or `sf`.
#[pyfunction]
#[pyo3(signature = (method, kind, m, n, l, q, xs, cutoff=None, dkappa=0.05))]
#[allow(clippy::too_many_arguments)]
fn curve(
    method: &str,
    kind: &str,
    m: usize,
    n: usize,
    l: usize,
    q: Vec<f64>,
    xs: Vec<f64>,
    cutoff: Option<f64>,
    dkappa: f64,
) -> PyResult<Vec<f64>> {
    let cfg = channel(m, n, l, q)?;
    let eval = MgfEvaluator::new(&cfg).map_err(to_py)?;
    let set: CurveSet = match method {
        "gaussian" | "weibull" => {
            let s = exact::moments_with(&eval).map_err(to_py)?;
            if method == "gaussian" {
                distributions::gaussian_curves(s.mu1, s.sigma2, &xs)
            } else {
                distributions::weibull_fit(s.mu1, s.mu2).and_then(|p| distributions::weibull_curves(p, &xs))
            }
            .map_err(to_py)?
        }
        "fourier" => {
            let grid = exact::mgf_grid_with(&eval, self::cutoff(cutoff), dkappa).map_err(to_py)?;
            distributions::fourier_curves(&grid, &xs).map_err(to_py)?
        }
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let c = match kind {
        "pdf" => set.pdf,
        "cdf" => set.cdf,
        "sf" => set.sf,
        other => return Err(PyValueError::new_err(format!("unknown kind `{other}`"))),
    };
    Ok(c.values())
}

/// Masked KL divergences of the three approximations against a simulation.
#[pyfunction]
#[pyo3(signature = (m, n, l, q, samples=200_000, seed=2024))]
fn compare<'py>(
    py: Python<'py>,
    m: usize,
    n: usize,
    l: usize,
    q: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = channel(m, n, l, q)?;
    let ens = montecarlo::run_ensemble(&cfg, samples, seed).map_err(to_py)?;
    let r = analysis::approximation_report(&cfg, &ens, &ReportOptions::default()).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("gaussian", r.gaussian.dkl)?;
    d.set_item("weibull", r.weibull.dkl)?;
    d.set_item("fourier", r.fourier.dkl)?;
    d.set_item("skewness", r.moments.skewness)?;
    d.set_item("advisory", r.advisory.to_string())?;
    d.set_item("best", r.best().to_string())?;
    Ok(d)
}

/// Capacity (nats) at each total power in dB for the given allocation shape.
#[pyfunction]
fn capacity_sweep(m: usize, n: usize, l: usize, ratios: Vec<f64>, rho_db: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(analysis::capacity_sweep(m, n, l, &ratios, &rho_db).map_err(to_py)?.capacity)
}

#[pymodule]
pub fn jacobi_mimo_py(module: &Bound<'_, PyModule>) -> PyResult<()> {
    module.add_function(wrap_pyfunction!(mgf, module)?)?;
    module.add_function(wrap_pyfunction!(mgf_grid, module)?)?;
    module.add_function(wrap_pyfunction!(moments, module)?)?;
    module.add_function(wrap_pyfunction!(ergodic_capacity, module)?)?;
    module.add_function(wrap_pyfunction!(simulate, module)?)?;
    module.add_function(wrap_pyfunction!(curve, module)?)?;
    module.add_function(wrap_pyfunction!(compare, module)?)?;
    module.add_function(wrap_pyfunction!(capacity_sweep, module)?)?;
    module.add("GENERATOR", montecarlo::GENERATOR)?;
    Ok(())
}
