//! Python bindings. Documents and reports cross the boundary as JSON text in
//! the same formats the command-line tool reads and writes; kernel samples
//! and trajectories come back as nested lists of Python `complex`.

use num_complex::Complex64;
use openext::extension::{
    fit_point_measure, DEFAULT_DISSIPATION_SEED, DEFAULT_DISSIPATION_TRIALS, kernel_eval, kernel_of_measure, minimal_extension, minimal_extension_of, KernelSamples,
};
use openext::hamiltonian::{frozen_report, LatticeSpec};
use openext::model::{validate_measure_raw, validate_open_raw, validate_system_raw};
use openext::report::{canonical_report, channels_report, check_report, decompose_report, Envelope, LatticeReport};
use openext::schema::{self, Document, MeasureJson, SystemJson};
use openext::simulate::{equivalence_residual, propagate_conservative, propagate_open, uniform_grid, Forcing, Trajectory};
use openext::{CMatrix, CVector, ConservativeSystem, Error, OpenSystem, ToleranceConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Matrix = Vec<Vec<Complex64>>;

fn to_py(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn tolerances(text: Option<&str>) -> PyResult<ToleranceConfig> {
    let tol: ToleranceConfig = match text {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(format!("tolerances: {e}")))?,
        None => ToleranceConfig::default(),
    };
    tol.validate().map_err(to_py)?;
    Ok(tol)
}

fn system(doc: &str, tol: &ToleranceConfig) -> PyResult<ConservativeSystem> {
    schema::parse_system(doc, tol).map_err(to_py)
}

fn rows(m: &CMatrix) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(m: &Matrix) -> PyResult<CMatrix> {
    let n = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if m.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    Ok(CMatrix::from_fn(n, cols, |i, j| m[i][j]))
}

fn states(t: &Trajectory) -> Vec<Vec<Complex64>> {
    t.states.iter().map(|v| v.iter().copied().collect()).collect()
}

/// Default tolerances as JSON.
#[pyfunction]
fn default_tolerances() -> String {
    serde_json::to_string(&ToleranceConfig::default()).expect("serializable")
}

/// Returns `(valid, report_json)` for a system, measure or open-system document.
#[pyfunction]
#[pyo3(signature = (doc, tolerances=None))]
fn validate(doc: &str, tolerances: Option<&str>) -> PyResult<(bool, String)> {
    let tol = self::tolerances(tolerances)?;
    let report = match schema::parse_document(doc).map_err(to_py)? {
        Document::System(s) => {
            let (n1, n2, omega) = s.raw().map_err(to_py)?;
            validate_system_raw(n1, n2, &omega, &tol)
        }
        Document::Measure(m) => validate_measure_raw(m.dim, &m.raw().map_err(to_py)?, &tol),
        Document::Open(o) => {
            let omega1 = schema::matrix_from_json(&o.omega1, o.kernel.dim).map_err(to_py)?;
            validate_open_raw(&omega1, o.kernel.dim, &o.kernel.raw().map_err(to_py)?, &tol)
        }
    };
    let text = serde_json::to_string(&report).expect("serializable");
    Ok((report.is_valid(), text))
}

/// Minimal conservative extension of a measure or open-system document.
#[pyfunction]
#[pyo3(signature = (doc, tolerances=None))]
fn extend(doc: &str, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let s = match schema::parse_document(doc).map_err(to_py)? {
        Document::Measure(m) => minimal_extension(&m.to_measure(&tol).map_err(to_py)?, &tol),
        Document::Open(o) => minimal_extension_of(&o.to_open(&tol).map_err(to_py)?, &tol),
        Document::System(_) => return Err(PyValueError::new_err("expected a measure or open-system document")),
    }
    .map_err(to_py)?;
    Ok(serde_json::to_string(&SystemJson::from_system(&s)).expect("serializable"))
}

/// Friction kernel `a(t)` of a system or measure document at the given times.
#[pyfunction]
#[pyo3(signature = (doc, times, tolerances=None))]
fn kernel(doc: &str, times: Vec<f64>, tolerances: Option<&str>) -> PyResult<Vec<Matrix>> {
    let tol = self::tolerances(tolerances)?;
    let samples = match schema::parse_document(doc).map_err(to_py)? {
        Document::System(s) => kernel_eval(&s.to_system(&tol).map_err(to_py)?, &times),
        Document::Measure(m) => kernel_of_measure(&m.to_measure_unchecked(&tol).map_err(to_py)?, &times),
        Document::Open(o) => kernel_of_measure(&o.kernel.to_measure_unchecked(&tol).map_err(to_py)?, &times),
    }
    .map_err(to_py)?;
    Ok(samples.values().iter().map(rows).collect())
}

fn report<T: serde::Serialize>(command: &str, tol: ToleranceConfig, result: T) -> String {
    Envelope::new(command, tol, None, result).to_json()
}

#[pyfunction]
#[pyo3(signature = (doc, tolerances=None))]
fn decompose(doc: &str, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let r = decompose_report(&system(doc, &tol)?, &tol).map_err(to_py)?;
    Ok(report("decompose", tol, r))
}

#[pyfunction]
#[pyo3(signature = (doc, tolerances=None))]
fn channels(doc: &str, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let r = channels_report(&system(doc, &tol)?, &tol).map_err(to_py)?;
    Ok(report("channels", tol, r))
}

#[pyfunction]
#[pyo3(signature = (doc, tolerances=None))]
fn canonical(doc: &str, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let r = canonical_report(&system(doc, &tol)?, &tol).map_err(to_py)?;
    Ok(report("canonical", tol, r))
}

#[pyfunction]
#[pyo3(signature = (doc, trials=DEFAULT_DISSIPATION_TRIALS, seed=DEFAULT_DISSIPATION_SEED, tolerances=None))]
fn check(doc: &str, trials: usize, seed: u64, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let r = check_report(&system(doc, &tol)?, trials, seed, &tol).map_err(to_py)?;
    Ok(Envelope::new("check", tol, None, r).with_seed(seed).to_json())
}

/// Fits a point measure to kernel samples; returns measure JSON.
#[pyfunction]
#[pyo3(signature = (times, values, max_atoms=8, tolerances=None))]
fn fit(times: Vec<f64>, values: Vec<Matrix>, max_atoms: usize, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let values = values.iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
    let samples = KernelSamples::new(times, values).map_err(to_py)?;
    let m = fit_point_measure(&samples, max_atoms, &tol).map_err(to_py)?;
    Ok(serde_json::to_string(&MeasureJson::from_measure(&m)).expect("serializable"))
}

/// Frozen-subspace report of a harmonic lattice.
#[pyfunction]
#[pyo3(signature = (d, l, n, gammas, m=1.0, xi=1.0, tolerances=None))]
fn lattice(d: usize, l: usize, n: usize, gammas: Vec<Vec<f64>>, m: f64, xi: f64, tolerances: Option<&str>) -> PyResult<String> {
    let tol = self::tolerances(tolerances)?;
    let spec = LatticeSpec { d, l, n, m, xi, gammas };
    spec.validate().map_err(to_py)?;
    let frozen = frozen_report(&spec, &tol).map_err(to_py)?;
    Ok(report("lattice", tol, LatticeReport::new(&spec, &frozen)))
}

/// Propagates from rest under a forcing profile given as JSON. `mode` is
/// "full" or "open"; returns `(times, states)`.
#[pyfunction]
#[pyo3(signature = (doc, forcing, dt, t_end, mode="full", tolerances=None))]
fn simulate(
    doc: &str,
    forcing: &str,
    dt: f64,
    t_end: f64,
    mode: &str,
    tolerances: Option<&str>,
) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
    let tol = self::tolerances(tolerances)?;
    let forcing: Forcing = serde_json::from_str(forcing).map_err(|e| PyValueError::new_err(format!("forcing: {e}")))?;
    let grid = uniform_grid(dt, t_end).map_err(to_py)?;
    let samples = forcing.sample(&grid);
    let traj = match mode {
        "full" => {
            let s = system(doc, &tol)?;
            if forcing.dim() != s.dim() && forcing.dim() != s.n1() {
                return Err(PyValueError::new_err(format!(
                    "forcing has dimension {}, expected {} or {}",
                    forcing.dim(),
                    s.n1(),
                    s.dim()
                )));
            }
            // Forcing on H₁ alone is padded with zeros on H₂.
            let padded: Vec<CVector> = samples
                .iter()
                .map(|f| {
                    let mut x = CVector::zeros(s.dim());
                    x.rows_mut(0, f.len()).copy_from(f);
                    x
                })
                .collect();
            propagate_conservative(&s, &CVector::zeros(s.dim()), &padded, &grid)
        }
        "open" => {
            let open = match schema::parse_document(doc).map_err(to_py)? {
                Document::Open(o) => o.to_open(&tol).map_err(to_py)?,
                Document::System(s) => {
                    let s = s.to_system(&tol).map_err(to_py)?;
                    let m = openext::extension::measure_of(&s, &tol).map_err(to_py)?;
                    OpenSystem::new(s.omega1(), m).map_err(to_py)?
                }
                Document::Measure(_) => return Err(PyValueError::new_err("expected a system or open-system document")),
            };
            propagate_open(&open, &samples, &grid)
        }
        other => return Err(PyValueError::new_err(format!("unknown mode `{other}`"))),
    }
    .map_err(to_py)?;
    Ok((traj.times.clone(), states(&traj)))
}

/// Relative residual `max‖P₁V − v₁‖ / max‖v₁‖` between full and open dynamics.
#[pyfunction]
#[pyo3(signature = (doc, forcing, dt, t_end, tolerances=None))]
fn equivalence(doc: &str, forcing: &str, dt: f64, t_end: f64, tolerances: Option<&str>) -> PyResult<f64> {
    let tol = self::tolerances(tolerances)?;
    let s = system(doc, &tol)?;
    let forcing: Forcing = serde_json::from_str(forcing).map_err(|e| PyValueError::new_err(format!("forcing: {e}")))?;
    let grid = uniform_grid(dt, t_end).map_err(to_py)?;
    let r = equivalence_residual(&s, &forcing.sample(&grid), &grid, &tol).map_err(to_py)?;
    Ok(r.relative())
}

#[pymodule]
#[pyo3(name = "openext")]
fn openext_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every binding to `m`; also used to embed the module.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", openext::VERSION)?;
    m.add("SCHEMA", schema::SCHEMA)?;
    m.add_function(wrap_pyfunction!(default_tolerances, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(extend, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(channels, m)?)?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(lattice, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(equivalence, m)?)?;
    Ok(())
}
