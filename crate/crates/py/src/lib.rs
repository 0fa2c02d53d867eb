//! Python bindings: scenarios, the three experiment drivers and the scalar
//! closed forms.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fdwp::cli::{self, Scenario};
use fdwp::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config { .. } | Error::Json(_) | Error::InvalidArgument(_) | Error::Domain { .. } => {
            PyValueError::new_err(err.to_string())
        }
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Experiment scenario. Built from a JSON string with the same keys as the
/// scenario files; missing keys take the reference values.
#[pyclass(name = "Scenario", module = "fdwp_py", skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (json = None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        let inner = match json {
            Some(text) => Scenario::from_json(text).map_err(to_py)?,
            None => Scenario::reference(),
        };
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyScenario { inner: cli::load_scenario(path.as_ref()).map_err(to_py)? })
    }

    #[getter]
    fn n_total(&self) -> usize {
        self.inner.params.n_total
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.inner.params.n_tx
    }

    #[getter]
    fn power_dbm(&self) -> f64 {
        self.inner.power_dbm
    }

    #[getter]
    fn rho_grid(&self) -> Vec<f64> {
        self.inner.rho_grid.clone()
    }

    #[getter]
    fn realizations(&self) -> usize {
        self.inner.realizations
    }

    #[setter]
    fn set_realizations(&mut self, n: usize) -> PyResult<()> {
        if n == 0 {
            return Err(PyValueError::new_err("realizations must be at least 1"));
        }
        self.inner.realizations = n;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn rb_grid_points(&self) -> usize {
        self.inner.rb_grid_points
    }

    #[setter]
    fn set_rb_grid_points(&mut self, n: usize) -> PyResult<()> {
        if n < 2 {
            return Err(PyValueError::new_err("rb_grid_points must be at least 2"));
        }
        self.inner.rb_grid_points = n;
        Ok(())
    }

    #[getter]
    fn mc_samples(&self) -> usize {
        self.inner.mc_samples
    }

    #[setter]
    fn set_mc_samples(&mut self, n: usize) -> PyResult<()> {
        if n < fdwp::mc::MIN_SAMPLES {
            return Err(PyValueError::new_err(format!("mc_samples must be at least {}", fdwp::mc::MIN_SAMPLES)));
        }
        self.inner.mc_samples = n;
        Ok(())
    }

    /// Averaged rate regions: list of dicts with `grid_index`, `method`,
    /// `r_b_target`, `ms_rate` and `feasible_fraction`. CSV files are
    /// written too when `out_dir` is given.
    #[pyo3(signature = (out_dir = None))]
    fn rate_region<'py>(&self, py: Python<'py>, out_dir: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let scenario = self.inner.clone();
        let dir = out_dir.map(std::path::PathBuf::from);
        let out = py.detach(move || cli::run_rate_region(&scenario, dir.as_deref())).map_err(to_py)?;
        out.average
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("grid_index", p.grid_index)?;
                d.set_item("method", p.method.as_str())?;
                d.set_item("r_b_target", p.r_b_target)?;
                d.set_item("ms_rate", p.ms_rate)?;
                d.set_item("feasible_fraction", p.feasible_fraction)?;
                Ok(d)
            })
            .collect()
    }

    /// Partial-CSI sweep: one dict per outage target with the averaged
    /// design and its outage figures.
    #[pyo3(signature = (out_dir = None))]
    fn partial_csi<'py>(&self, py: Python<'py>, out_dir: Option<&str>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let scenario = self.inner.clone();
        let dir = out_dir.map(std::path::PathBuf::from);
        let out = py.detach(move || cli::run_partial_csi(&scenario, dir.as_deref())).map_err(to_py)?;
        out.rows
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("rho", r.rho)?;
                d.set_item("alpha_opt", r.alpha_opt)?;
                d.set_item("beta_opt", r.beta_opt)?;
                d.set_item("ergodic_rate_bpcu", r.ergodic_rate_bpcu)?;
                d.set_item("outage_bound", r.outage_bound)?;
                d.set_item("outage_exact", r.outage_exact)?;
                d.set_item("outage_mc", r.outage_mc)?;
                d.set_item("feasible_fraction", r.feasible_fraction)?;
                Ok(d)
            })
            .collect()
    }

    /// Closed forms against simulation: list of
    /// `(kind, sweep_dbm, analytic, monte_carlo, tolerance, passed)`.
    #[pyo3(signature = (out_dir = None))]
    fn validate(&self, py: Python<'_>, out_dir: Option<&str>) -> PyResult<Vec<(String, f64, f64, f64, f64, bool)>> {
        let scenario = self.inner.clone();
        let dir = out_dir.map(std::path::PathBuf::from);
        let report = py.detach(move || cli::run_validate(&scenario, dir.as_deref())).map_err(to_py)?;
        Ok(report
            .rows
            .iter()
            .map(|r| {
                let kind = match r.kind {
                    fdwp::mc::ValidationKind::Outage => "outage",
                    fdwp::mc::ValidationKind::ErgodicRate => "ergodic_rate",
                };
                (kind.to_string(), r.sweep_dbm, r.analytic, r.monte_carlo, r.tolerance, r.pass)
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n_total={}, n_tx={}, power_dbm={}, realizations={}, seed={})",
            self.inner.params.n_total, self.inner.params.n_tx, self.inner.power_dbm, self.inner.realizations, self.inner.seed
        )
    }
}

/// Principal branch of the Lambert W function.
#[pyfunction]
fn lambert_w0(y: f64) -> PyResult<f64> {
    fdwp::specfun::lambert_w0(y).map_err(to_py)
}

/// Lower branch of the Lambert W function on `[-1/e, 0)`.
#[pyfunction]
fn lambert_wm1(y: f64) -> PyResult<f64> {
    fdwp::specfun::lambert_wm1(y).map_err(to_py)
}

/// `e^x E1(x)`.
#[pyfunction]
fn exp_scaled_e1(x: f64) -> PyResult<f64> {
    fdwp::specfun::exp_scaled_e1(x).map_err(to_py)
}

/// CDF at `t` of `sum_i lambdas[i] E_i` with i.i.d. unit exponentials.
#[pyfunction]
fn hypoexp_cdf(lambdas: Vec<f64>, t: f64) -> PyResult<f64> {
    let mix = fdwp::specfun::exp_mix_coeffs(&lambdas).map_err(to_py)?;
    fdwp::specfun::exp_mix_cdf(&mix, t).map_err(to_py)
}

/// Smallest zero-forcing time split reaching BS rate `r_b`, or `None`.
#[pyfunction]
fn zf_alpha_opt(r_b: f64, b: f64, gamma: f64) -> PyResult<Option<f64>> {
    fdwp::fullcsi::zf_alpha_opt(r_b, b, gamma).map_err(to_py)
}

/// `(alpha, R_B)` at the peak of the zero-forcing BS rate curve.
#[pyfunction]
fn rb_max(b_tilde: f64) -> PyResult<(f64, f64)> {
    fdwp::fullcsi::rb_max(b_tilde).map_err(to_py)
}

#[pymodule]
fn fdwp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(lambert_w0, m)?)?;
    m.add_function(wrap_pyfunction!(lambert_wm1, m)?)?;
    m.add_function(wrap_pyfunction!(exp_scaled_e1, m)?)?;
    m.add_function(wrap_pyfunction!(hypoexp_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(zf_alpha_opt, m)?)?;
    m.add_function(wrap_pyfunction!(rb_max, m)?)?;
    Ok(())
}
