use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mipslab_core::dgp::{World, PRESET_NAMES};
use mipslab_core::imputation::{impute_fitted, impute_oracle, impute_propensity, ImputedStack, ResponseWeighting};
use mipslab_core::runner::{appendix_report, plim_reports, run_experiment as run, summarize, ExperimentConfig};
use mipslab_core::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn from_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn world(preset: &str) -> PyResult<World> {
    World::preset(preset).map_err(to_py)
}

/// Names of the built-in worlds.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// Average treatment effect of a preset world.
#[pyfunction]
fn true_ate(preset: &str) -> PyResult<f64> {
    world(preset)?.true_ate().map_err(to_py)
}

/// One observed sample as a dict of columns; missing `x` is `None`.
#[pyfunction]
fn generate<'py>(py: Python<'py>, preset: &str, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let ds = world(preset)?.generate(n, seed).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("z", ds.z)?;
    out.set_item("x", ds.x)?;
    out.set_item("a", ds.a)?;
    out.set_item("y", ds.y)?;
    out.set_item("r", ds.r)?;
    Ok(out)
}

/// Exact probability limits of the within and across methods.
#[pyfunction]
fn plim<'py>(py: Python<'py>, preset: &str) -> PyResult<Bound<'py, PyAny>> {
    let reports = plim_reports(&world(preset)?).map_err(to_py)?;
    from_json(py, &reports)
}

/// Exact checks of covariate-only and two-stage imputation.
#[pyfunction]
fn check_appendix<'py>(py: Python<'py>, preset: &str) -> PyResult<Bound<'py, PyAny>> {
    let report = appendix_report(&world(preset)?).map_err(to_py)?;
    from_json(py, &report)
}

/// Generates a sample and imputes it `m` times.
///
/// `imputer` is `"oracle"`, `"fitted"` or `"propensity"`. The result holds
/// the observed columns plus `x_imputed` or `u_imputed`, one list per
/// imputation.
#[pyfunction]
#[pyo3(signature = (preset, n, m, seed, imputer = "oracle"))]
fn impute<'py>(py: Python<'py>, preset: &str, n: usize, m: usize, seed: u64, imputer: &str) -> PyResult<Bound<'py, PyDict>> {
    let w = world(preset)?;
    let ds = w.generate(n, seed).map_err(to_py)?;
    let stack: ImputedStack = match imputer {
        "oracle" => impute_oracle(&ds, &w, m, seed),
        "fitted" => impute_fitted(&ds, w.kind(), m, seed),
        "propensity" => impute_propensity(&ds, m, seed, ResponseWeighting::Weighted).map(|(s, _)| s),
        other => return Err(PyValueError::new_err(format!("unknown imputer '{other}'"))),
    }
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("z", &stack.base.z)?;
    out.set_item("x", &stack.base.x)?;
    out.set_item("a", &stack.base.a)?;
    out.set_item("y", &stack.base.y)?;
    out.set_item("r", &stack.base.r)?;
    out.set_item("m", stack.m)?;
    out.set_item("x_imputed", stack.x_imputed)?;
    out.set_item("u_imputed", stack.u_imputed)?;
    out.set_item("approximate", stack.approximate)?;
    Ok(out)
}

/// Runs an experiment from a JSON configuration string.
///
/// Returns `{"results": [...], "summary": [...]}`.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let config = ExperimentConfig::from_json(config).map_err(to_py)?;
    let truth = config.validate().and_then(|w| w.true_ate()).map_err(to_py)?;
    let rows = py.detach(|| run(&config)).map_err(to_py)?;
    let summary = summarize(&rows, truth).map_err(to_py)?;
    from_json(py, &serde_json::json!({ "results": rows, "summary": summary }))
}

#[pymodule]
fn mipslab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(true_ate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(plim, m)?)?;
    m.add_function(wrap_pyfunction!(check_appendix, m)?)?;
    m.add_function(wrap_pyfunction!(impute, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
