//! Python bindings. Structured results cross as `dict`s via JSON.

use backbone_core::bounds::{self, BoundsOptions, BoundsReport, DelayConvention, EtaKappa, ExSource};
use backbone_core::experiment::{emit_bounds as emit_grid, run_suite as run, ExperimentSpec, GridSpec, SuiteOptions};
use backbone_core::metrics::extract_indicators;
use backbone_core::{run_execution, ModelKind, ModelParams};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn kind(model: &str) -> PyResult<ModelKind> {
    model.parse().map_err(err)
}

/// Minimum δ; `eta_kappa=None` drops the `4Δ/ηκ` term.
#[pyfunction]
#[pyo3(signature = (model, ex, ex_star, epsilon, delta_net=0, eta_kappa=None))]
fn delta_min(model: &str, ex: f64, ex_star: f64, epsilon: f64, delta_net: u32, eta_kappa: Option<u64>) -> PyResult<f64> {
    let eta = eta_kappa.map_or(EtaKappa::Infinite, EtaKappa::Finite);
    bounds::delta_min(kind(model)?, ex, ex_star, epsilon, delta_net, eta).map_err(err)
}

/// `(value, satisfiable, printed)`; `printed` is the reference message-loss
/// closed form, `None` for the other models.
#[pyfunction]
fn s_max(model: &str, c: f64, delta: f64, t: u32, n: u32) -> PyResult<(f64, bool, Option<f64>)> {
    let r = bounds::s_max(kind(model)?, c, delta, t, n).map_err(err)?;
    Ok((r.value, r.satisfiable, r.printed))
}

#[pyfunction]
fn max_adv_fraction(c: f64, delta: f64) -> f64 {
    bounds::max_adv_fraction(c, delta)
}

#[pyfunction]
fn phi_bound(s: f64) -> PyResult<f64> {
    bounds::phi_bound(s).map_err(err)
}

#[allow(clippy::too_many_arguments)]
fn params(n: u32, t: u32, s: f64, p: f64, q: u32, delta_net: u32, b_flag: bool, kappa: u32, eta_kappa: u64, epsilon: f64, c: f64) -> PyResult<ModelParams> {
    let params = ModelParams { n, t, s, q, delta_net, b_flag, p, kappa, eta_kappa, epsilon, c };
    params.validate().map_err(err)?;
    Ok(params)
}

/// Bounds report for one parameter point, as a dict.
#[pyfunction]
#[pyo3(signature = (n, t, s, p, q=1, delta_net=0, b_flag=true, kappa=64, eta_kappa=4000, epsilon=0.005, c=0.5, ex_source="upper", delay_convention="isolated", drop_eta_term=false))]
#[allow(clippy::too_many_arguments)]
fn bounds_report(
    py: Python<'_>,
    n: u32,
    t: u32,
    s: f64,
    p: f64,
    q: u32,
    delta_net: u32,
    b_flag: bool,
    kappa: u32,
    eta_kappa: u64,
    epsilon: f64,
    c: f64,
    ex_source: &str,
    delay_convention: &str,
    drop_eta_term: bool,
) -> PyResult<Py<PyAny>> {
    let params = params(n, t, s, p, q, delta_net, b_flag, kappa, eta_kappa, epsilon, c)?;
    let ex_source = match ex_source {
        "upper" => ExSource::Upper,
        "exact" => ExSource::Exact,
        other => return Err(err(format!("ex_source must be `upper` or `exact`, got `{other}`"))),
    };
    let delay_convention = match delay_convention {
        "isolated" => DelayConvention::Isolated,
        "strict" => DelayConvention::Strict,
        other => return Err(err(format!("delay_convention must be `isolated` or `strict`, got `{other}`"))),
    };
    let opts = BoundsOptions { ex_source, delay_convention, drop_eta_term };
    to_py(py, &BoundsReport::compute(&params, &opts).map_err(err)?)
}

/// Runs an experiment spec given as TOML text and returns its summary dict.
#[pyfunction]
#[pyo3(signature = (spec_toml, out=None, jobs=None))]
fn run_suite(py: Python<'_>, spec_toml: &str, out: Option<std::path::PathBuf>, jobs: Option<usize>) -> PyResult<Py<PyAny>> {
    let spec = ExperimentSpec::from_toml(spec_toml).map_err(err)?;
    let opts = SuiteOptions { out: out.as_deref(), jobs, ..Default::default() };
    let summary = py.detach(|| run(&spec, &opts)).map_err(err)?;
    to_py(py, &summary)
}

/// Figure-1 series and per-point reports for a grid given as TOML text.
#[pyfunction]
fn emit_bounds(py: Python<'_>, grid_toml: &str) -> PyResult<Py<PyAny>> {
    let grid = GridSpec::from_toml(grid_toml).map_err(err)?;
    to_py(py, &emit_grid(&grid).map_err(err)?)
}

/// Per-round indicator rows (list of dicts) of one trial of a spec.
#[pyfunction]
#[pyo3(signature = (spec_toml, trial=0))]
fn indicators(py: Python<'_>, spec_toml: &str, trial: u64) -> PyResult<Py<PyAny>> {
    let spec = ExperimentSpec::from_toml(spec_toml).map_err(err)?;
    let config = spec.execution_config(trial).map_err(err)?;
    let rows = py
        .detach(|| run_execution(&config).and_then(|view| extract_indicators(&view)))
        .map_err(err)?;
    to_py(py, &rows)
}

#[pymodule]
fn backbone_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(delta_min, m)?)?;
    m.add_function(wrap_pyfunction!(s_max, m)?)?;
    m.add_function(wrap_pyfunction!(max_adv_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(phi_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    m.add_function(wrap_pyfunction!(emit_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(indicators, m)?)?;
    Ok(())
}
