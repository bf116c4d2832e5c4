//! Python bindings.

use std::path::PathBuf;

use nematic::diagnostics::{self, EnergyRecord};
use nematic::dynamics::{random_initial_state, Dynamics, SimConfig, State};
use nematic::io;
use nematic::potential::{BallMajumdar, Mollified};
use nematic::tensor::{physicality_margin, Sym0Matrix};
use nematic::verify;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn sym0(dim: usize, components: &[f64]) -> PyResult<Sym0Matrix> {
    let want = if dim == 2 { 2 } else if dim == 3 { 5 } else { 0 };
    if want == 0 || components.len() != want {
        return Err(PyValueError::new_err(format!(
            "dim {dim} needs {want} Sym0 components, got {}",
            components.len()
        )));
    }
    Ok(Sym0Matrix::from_components(dim, components))
}

/// `(psi, grad)` of the exact potential; raises outside the physical set.
#[pyfunction]
fn psi(dim: usize, q: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let e = BallMajumdar::new(dim).psi(&sym0(dim, &q)?).map_err(err)?;
    Ok((e.psi, e.grad.components().to_vec()))
}

/// `(psi_J, grad)`; finite everywhere.
#[pyfunction]
fn moreau_yosida(dim: usize, q: Vec<f64>, j: f64) -> PyResult<(f64, Vec<f64>)> {
    let e = BallMajumdar::new(dim).moreau_yosida(&sym0(dim, &q)?, j).map_err(err)?;
    Ok((e.value, e.grad.components().to_vec()))
}

/// `(psi_N, grad)`; finite everywhere.
#[pyfunction]
fn mollified(dim: usize, q: Vec<f64>, n: usize) -> PyResult<(f64, Vec<f64>)> {
    let (v, g) = Mollified::new(dim, n).eval(&sym0(dim, &q)?).map_err(err)?;
    Ok((v, g.components().to_vec()))
}

#[pyfunction]
fn margin(dim: usize, q: Vec<f64>) -> PyResult<f64> {
    Ok(physicality_margin(&sym0(dim, &q)?))
}

#[pyfunction]
fn parse_config(text: &str) -> PyResult<String> {
    let cfg = io::parse_config_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    serde_json::to_string(&cfg).map_err(err)
}

/// Runs a suite (`potential`, `spectral`, `dynamics`) and returns
/// `[(id, passed, detail)]`.
#[pyfunction]
#[pyo3(signature = (suite, samples = 40, seed = 0))]
fn run_verify(suite: &str, samples: usize, seed: u64) -> PyResult<Vec<(String, bool, String)>> {
    let checks = match suite {
        "potential" => {
            let mut c = verify::potential_suite(2, samples, seed);
            c.extend(verify::potential_suite(3, samples.div_ceil(4), seed));
            c
        }
        "spectral" => verify::spectral_suite(seed),
        "dynamics" => verify::dynamics_suite(seed),
        other => return Err(PyValueError::new_err(format!("unknown suite {other:?}"))),
    };
    Ok(checks.into_iter().map(|c| (c.id, c.passed, c.detail)).collect())
}

/// `(measured, analytic, relative error)` of the Taylor-Green decay.
#[pyfunction]
#[pyo3(signature = (nu = 0.1, t_final = 1.0, n = 64, dt = 1e-3))]
fn taylor_green(nu: f64, t_final: f64, n: usize, dt: f64) -> PyResult<(f64, f64, f64)> {
    let r = verify::taylor_green_scenario(nu, t_final, n, dt).map_err(err)?;
    Ok((r.measured, r.reference, r.rel_error))
}

#[pyfunction]
#[pyo3(signature = (trajectory, n_reg = 16))]
fn certify(py: Python<'_>, trajectory: PathBuf, n_reg: usize) -> PyResult<Py<PyDict>> {
    let rep = io::certify_trajectory(&trajectory, n_reg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("max_defect", rep.max_defect())?;
    d.set_item("tolerance", rep.tolerance())?;
    d.set_item("passes", rep.passes())?;
    d.set_item("times", rep.rows.iter().map(|r| r.t).collect::<Vec<_>>())?;
    d.set_item("defects", rep.rows.iter().map(|r| r.defect).collect::<Vec<_>>())?;
    Ok(d.unbind())
}

fn record_dict<'py>(py: Python<'py>, r: &EnergyRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for (k, v) in [
        ("t", r.t),
        ("E", r.e),
        ("F", r.f),
        ("dissipation", r.dissipation),
        ("margin", r.margin),
        ("psi_sup", r.psi_sup),
        ("convexity_integral", r.convexity_integral),
        ("lambda_min", r.lambda_min),
        ("lambda_max", r.lambda_max),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// A running simulation built from config text.
#[pyclass]
struct Simulation {
    dynm: Dynamics,
    state: State,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &str) -> PyResult<Self> {
        let cfg: SimConfig = io::parse_config_str(config).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let dynm = Dynamics::new(cfg.clone()).map_err(err)?;
        let state = random_initial_state(&cfg, &dynm.grid);
        Ok(Self { dynm, state })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t
    }

    #[getter]
    fn dim(&self) -> usize {
        self.dynm.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.dynm.grid.n()
    }

    /// Advances `steps` time steps; the GIL is released meanwhile.
    #[pyo3(signature = (steps = 1))]
    fn step(&mut self, py: Python<'_>, steps: usize) -> PyResult<()> {
        let dynm = &self.dynm;
        let mut s = self.state.clone();
        let out = py.detach(|| {
            for _ in 0..steps {
                s = dynm.step(&s)?;
            }
            Ok::<_, nematic::dynamics::DynamicsError>(s)
        });
        self.state = out.map_err(err)?;
        Ok(())
    }

    fn record<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = diagnostics::record(&self.dynm, &self.state).map_err(err)?;
        record_dict(py, &r)
    }

    /// Q components, one flat row-major list per component.
    fn q(&self) -> Vec<Vec<f64>> {
        self.state.q.clone()
    }

    /// Velocity components, one flat row-major list per axis.
    fn u(&self) -> Vec<Vec<f64>> {
        self.state.u.clone()
    }

    fn min_margin(&self) -> f64 {
        self.state.min_margin(self.dynm.dim())
    }
}

#[pymodule]
fn nematic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(psi, m)?)?;
    m.add_function(wrap_pyfunction!(moreau_yosida, m)?)?;
    m.add_function(wrap_pyfunction!(mollified, m)?)?;
    m.add_function(wrap_pyfunction!(margin, m)?)?;
    m.add_function(wrap_pyfunction!(parse_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_green, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_class::<Simulation>()?;
    Ok(())
}
