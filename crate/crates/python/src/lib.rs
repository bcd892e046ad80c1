//! Python bindings for the `optomech` engine.

use std::path::PathBuf;

use nalgebra::Matrix6;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use optomech::config::ExperimentConfig;
use optomech::fluctuations::{build_diffusion, build_drift, steady_state_lyapunov};
use optomech::measures;
use optomech::model::{CovarianceMatrix, DriveSpec, EngineeredCoupling, SystemParams};
use optomech::SimError;

type SweepRow = (Vec<f64>, String, Option<f64>);

fn to_py(e: SimError) -> PyErr {
    match e {
        SimError::InvalidConfig(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows(m: &Matrix6<f64>) -> Vec<Vec<f64>> {
    (0..6)
        .map(|i| (0..6).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix(values: Vec<Vec<f64>>) -> PyResult<Matrix6<f64>> {
    if values.len() != 6 || values.iter().any(|r| r.len() != 6) {
        return Err(PyValueError::new_err("expected a 6x6 nested list"));
    }
    Ok(Matrix6::from_fn(|i, j| values[i][j]))
}

/// Physical parameters in units of the mechanical frequency.
#[pyclass(name = "Params", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: SystemParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (*, omega_m=1.0, delta_a, kappa, gamma_m, g, delta_c, gamma_a, g0, n_th=0.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        omega_m: f64,
        delta_a: f64,
        kappa: f64,
        gamma_m: f64,
        g: f64,
        delta_c: f64,
        gamma_a: f64,
        g0: f64,
        n_th: f64,
    ) -> PyResult<Self> {
        let inner = SystemParams {
            omega_m,
            delta_a,
            kappa,
            gamma_m,
            g,
            delta_c,
            gamma_a,
            g0_collective: g0,
            n_th,
        };
        let bad = inner.violations();
        if !bad.is_empty() {
            return Err(PyValueError::new_err(bad.join("; ")));
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn entanglement() -> Self {
        Self {
            inner: SystemParams::entanglement_preset(),
        }
    }

    #[staticmethod]
    fn squeezing() -> Self {
        Self {
            inner: SystemParams::squeezing_preset(),
        }
    }

    #[staticmethod]
    fn engineering() -> Self {
        Self {
            inner: SystemParams::engineering_preset(),
        }
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = &self.inner;
        let d = PyDict::new(py);
        d.set_item("omega_m", p.omega_m)?;
        d.set_item("delta_a", p.delta_a)?;
        d.set_item("kappa", p.kappa)?;
        d.set_item("gamma_m", p.gamma_m)?;
        d.set_item("g", p.g)?;
        d.set_item("delta_c", p.delta_c)?;
        d.set_item("gamma_a", p.gamma_a)?;
        d.set_item("g0", p.g0_collective)?;
        d.set_item("n_th", p.n_th)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Params({})",
            serde_json::to_string(&self.inner).unwrap_or_default()
        )
    }
}

/// Harmonic drive `E(t) = sum_n E_n exp(-i n Omega t)`.
#[pyclass(name = "Drive", from_py_object)]
#[derive(Clone)]
struct PyDrive {
    inner: DriveSpec,
}

#[pymethods]
impl PyDrive {
    #[new]
    fn new(omega: f64, components: std::collections::BTreeMap<i32, Complex64>) -> PyResult<Self> {
        let inner = DriveSpec::new(omega, components);
        let bad = inner.violations(optomech::model::DEFAULT_MAX_HARMONIC);
        if !bad.is_empty() {
            return Err(PyValueError::new_err(bad.join("; ")));
        }
        Ok(Self { inner })
    }

    /// Drive that produces the effective coupling `G1 + G2 exp(-i Omega t)`.
    #[staticmethod]
    fn engineered(params: &PyParams, g1: f64, g2: f64, omega: f64) -> PyResult<Self> {
        let target = EngineeredCoupling {
            g1,
            g2,
            big_omega: omega,
        };
        let inner =
            optomech::engineering::modulation_components(&params.inner, &target).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.big_omega
    }

    #[getter]
    fn components(&self) -> std::collections::BTreeMap<i32, Complex64> {
        self.inner.components.clone()
    }

    fn value(&self, t: f64) -> Complex64 {
        self.inner.value(t)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("drive serializes")
    }

    fn __repr__(&self) -> String {
        format!("Drive({})", self.to_json())
    }
}

/// A JSON experiment configuration.
#[pyclass(name = "Experiment", from_py_object)]
#[derive(Clone)]
struct PyExperiment {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperiment {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::from_json(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn recipe(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: optomech::recipes::load(name).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams {
            inner: self.inner.params,
        }
    }

    #[getter]
    fn variants(&self) -> Vec<String> {
        self.inner
            .variants
            .iter()
            .map(|v| v.label.clone())
            .collect()
    }

    /// Copy with one scalar overridden (a parameter name or a drive amplitude such as `E`).
    fn with_scalar(&self, name: &str, value: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_scalar(name, value).map_err(to_py)?,
        })
    }

    /// Copy with the named variant applied.
    fn variant(&self, label: &str) -> PyResult<Self> {
        let v = self
            .inner
            .variants
            .iter()
            .find(|v| v.label == label)
            .ok_or_else(|| PyValueError::new_err(format!("unknown variant {label:?}")))?;
        Ok(Self {
            inner: self.inner.variant(v).map_err(to_py)?,
        })
    }

    /// Runs the base configuration in memory.
    ///
    /// Returns a dict with `t`, `moments` (rows of q, p, re a, im a, re c, im c),
    /// `cm` (6x6 nested lists) and the per-sample measures
    /// `EN`, `v11`, `v22`, `neff`, `r_db`.
    fn simulate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = self.inner.clone();
        cfg.variants.clear();
        let data = py
            .detach(|| optomech::runner::simulate(&cfg))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("t", data.moments.iter().map(|s| s.t).collect::<Vec<_>>())?;
        d.set_item(
            "moments",
            data.moments
                .iter()
                .map(|s| s.state.to_array().to_vec())
                .collect::<Vec<_>>(),
        )?;
        d.set_item(
            "cm",
            data.cm.iter().map(|s| rows(&s.cm.0)).collect::<Vec<_>>(),
        )?;
        d.set_item("EN", data.measures.iter().map(|m| m.en).collect::<Vec<_>>())?;
        d.set_item(
            "v11",
            data.measures.iter().map(|m| m.v11).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "v22",
            data.measures.iter().map(|m| m.v22).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "neff",
            data.measures.iter().map(|m| m.neff).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "r_db",
            data.measures.iter().map(|m| m.r_db).collect::<Vec<_>>(),
        )?;
        if let Some(s) = data.stability {
            d.set_item("stable", s.report.stable)?;
            d.set_item("margin", s.report.margin)?;
        }
        Ok(d)
    }

    /// Maximum relative deviation between the Floquet series and the
    /// integrated mean values over the final two periods.
    fn compare_sources<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = self.inner.clone();
        let r = py
            .detach(|| optomech::runner::compare_sources(&cfg))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        for (k, v) in [("q", r.q), ("p", r.p), ("a", r.a), ("c", r.c)] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// Evaluates the configured sweep; returns `(coords, status, EN)` tuples.
    #[pyo3(signature = (jobs=None))]
    fn sweep(&self, py: Python<'_>, jobs: Option<usize>) -> PyResult<Vec<SweepRow>> {
        let cfg = self.inner.clone();
        let r = py
            .detach(|| optomech::runner::run_sweep(&cfg, jobs))
            .map_err(to_py)?;
        Ok(r.cells
            .into_iter()
            .map(|c| (c.coords, c.status.as_str().to_owned(), c.en))
            .collect())
    }

    /// Writes CSV files and `manifest.json`; returns the manifest as JSON.
    #[pyo3(signature = (out_dir, jobs=None))]
    fn run(&self, py: Python<'_>, out_dir: PathBuf, jobs: Option<usize>) -> PyResult<String> {
        let cfg = self.inner.clone();
        let summary = py
            .detach(|| optomech::runner::run_experiment(&cfg, &out_dir, jobs))
            .map_err(to_py)?;
        Ok(serde_json::to_string(&summary.manifest).expect("manifest serializes"))
    }
}

#[pyfunction]
fn recipes() -> Vec<&'static str> {
    optomech::recipes::names().collect()
}

/// Drift matrix of the fluctuations about the mean values `q`, `a`.
#[pyfunction]
fn drift_matrix(params: &PyParams, q: f64, a: Complex64) -> Vec<Vec<f64>> {
    rows(&build_drift(&params.inner, q, a).0)
}

/// Stationary covariance matrix about fixed mean values `q`, `a`.
#[pyfunction]
fn steady_state_cm(params: &PyParams, q: f64, a: Complex64) -> PyResult<Vec<Vec<f64>>> {
    let drift = build_drift(&params.inner, q, a);
    let v = steady_state_lyapunov(&drift, &build_diffusion(&params.inner)).map_err(to_py)?;
    Ok(rows(&v.0))
}

/// Atom-mirror logarithmic negativity of a 6x6 covariance matrix.
#[pyfunction]
fn log_negativity(cm: Vec<Vec<f64>>) -> PyResult<f64> {
    measures::atom_mirror_negativity(&CovarianceMatrix(matrix(cm)?)).map_err(to_py)
}

/// Effective phonon number `(V11 + V22 - 1) / 2`.
#[pyfunction]
fn phonon_number(cm: Vec<Vec<f64>>) -> PyResult<f64> {
    Ok(measures::mean_phonon_number(&CovarianceMatrix(matrix(cm)?)))
}

/// Squeezing of the mechanical block: `(lambda, r_raw, r_db)`.
#[pyfunction]
fn squeezing(cm: Vec<Vec<f64>>) -> PyResult<(f64, f64, f64)> {
    let s = measures::squeezing_parameter(&CovarianceMatrix(matrix(cm)?).mechanical_block())
        .map_err(to_py)?;
    Ok((s.lambda, s.r_raw, s.r_db))
}

#[pymodule]
fn optomech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyDrive>()?;
    m.add_class::<PyExperiment>()?;
    m.add_function(wrap_pyfunction!(recipes, m)?)?;
    m.add_function(wrap_pyfunction!(drift_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_cm, m)?)?;
    m.add_function(wrap_pyfunction!(log_negativity, m)?)?;
    m.add_function(wrap_pyfunction!(phonon_number, m)?)?;
    m.add_function(wrap_pyfunction!(squeezing, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
