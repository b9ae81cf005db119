//! Python bindings: `import chb`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use chb_core::config::{parse_config, SimConfig};
use chb_core::error::Error;
use chb_core::harness::{self, MmsProblem, SweepResult};
use chb_core::model::{validate as validate_spec, ModelSpec, ValidationReport, DEFAULT_SAMPLES, DEFAULT_SAMPLE_RANGE};
use chb_core::run::run_simulation;
use chb_core::stepper::{initial_state, step, Diagnostics, FlowMode, State, StepConfig};
use chb_core::{CellField, Grid2D};

fn py_err(e: impl Into<Error>) -> PyErr {
    let e = e.into();
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        4 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(f: &CellField) -> Vec<Vec<f64>> {
    let (nx, _) = f.dims();
    f.as_slice().chunks(nx).map(|r| r.to_vec()).collect()
}

fn diagnostics_dict<'py>(py: Python<'py>, d: &Diagnostics) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("t", d.t)?;
    out.set_item("energy", d.energy)?;
    out.set_item("mass", d.mass)?;
    out.set_item("dissipation", d.dissipation)?;
    out.set_item("boundary_flux", d.boundary_flux)?;
    out.set_item("source_mass", d.source_mass)?;
    out.set_item("div_residual", d.div_residual)?;
    out.set_item("energy_residual", d.energy_residual)?;
    out.set_item("mass_residual", d.mass_residual)?;
    out.set_item("suggested_dt", d.suggested_dt)?;
    Ok(out)
}

fn sweep_dict<'py>(py: Python<'py>, r: &SweepResult) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("name", &r.name)?;
    out.set_item("parameter", &r.parameter)?;
    out.set_item("values", &r.values)?;
    out.set_item("errors", &r.errors)?;
    out.set_item("slope", r.slope)?;
    out.set_item("monotonic", r.monotonic)?;
    for (k, v) in &r.columns {
        out.set_item(k, v)?;
    }
    Ok(out)
}

/// Uniform cell-centred grid.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(Grid2D);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, ny=None, lx=1.0, ly=1.0))]
    fn new(nx: usize, ny: Option<usize>, lx: f64, ly: f64) -> PyResult<Self> {
        Grid2D::new(nx, ny.unwrap_or(nx), lx, ly).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn nx(&self) -> usize {
        self.0.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx
    }

    #[getter]
    fn dy(&self) -> f64 {
        self.0.dy
    }

    fn __repr__(&self) -> String {
        format!("Grid({}x{}, dx={}, dy={})", self.0.nx, self.0.ny, self.0.dx, self.0.dy)
    }
}

/// Assumption audit result.
#[pyclass(name = "ValidationReport", frozen)]
struct PyReport(ValidationReport);

#[pymethods]
impl PyReport {
    #[getter]
    fn passed(&self) -> bool {
        self.0.all_passed()
    }

    /// Names of the failed assumptions, e.g. `["A2"]`.
    #[getter]
    fn failed(&self) -> Vec<String> {
        self.0.failed_assumptions().iter().map(|a| a.to_string()).collect()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

/// Parsed and checked JSON run configuration.
#[pyclass(name = "Config", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfig(SimConfig);

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_config(text).map(PyConfig).map_err(py_err)
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn grid(&self) -> PyResult<PyGrid> {
        self.0.grid().map(PyGrid).map_err(py_err)
    }

    fn validate(&self) -> PyResult<PyReport> {
        self.0.audit().map(PyReport).map_err(py_err)
    }

    /// Runs the configured time loop, optionally into `out_dir`; returns a
    /// summary dict.
    #[pyo3(signature = (out_dir=None, n_steps=None))]
    fn run<'py>(&self, py: Python<'py>, out_dir: Option<PathBuf>, n_steps: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = self.0.clone();
        if let Some(d) = out_dir {
            cfg.output.directory = d.to_string_lossy().into_owned();
        }
        if let Some(n) = n_steps {
            cfg.stepping.n_steps = n;
        }
        let s = py.detach(|| run_simulation(&cfg)).map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("steps", s.steps)?;
        out.set_item("final_time", s.final_time)?;
        out.set_item("diagnostics_path", s.diagnostics_path)?;
        out.set_item("snapshots", s.snapshots)?;
        if let Some(d) = s.last {
            out.set_item("last", diagnostics_dict(py, &d)?)?;
        }
        Ok(out)
    }

    /// Stepping state initialised from this configuration.
    fn simulation(&self) -> PyResult<PySimulation> {
        self.0.check().map_err(py_err)?;
        let g = self.0.grid().map_err(py_err)?;
        let spec = self.0.model_spec();
        let cfg = self.0.step_config();
        PySimulation::build(g, spec, cfg)
    }
}

/// Interactive time stepper.
#[pyclass(name = "Simulation", unsendable)]
struct PySimulation {
    grid: Grid2D,
    spec: ModelSpec,
    cfg: StepConfig,
    state: State,
    steps: usize,
}

impl PySimulation {
    fn build(grid: Grid2D, spec: ModelSpec, cfg: StepConfig) -> PyResult<Self> {
        let phi0 = spec.phi0.sample(&grid);
        let state = initial_state(&grid, phi0, &spec, &cfg).map_err(|source| py_err(Error::Step { step: 0, source }))?;
        Ok(PySimulation {
            grid,
            spec,
            cfg,
            state,
            steps: 0,
        })
    }
}

#[pymethods]
impl PySimulation {
    /// Default model on an `n`x`n` unit square; `flow_mode` is "brinkman" or
    /// "darcy".
    #[new]
    #[pyo3(signature = (n, dt=1e-4, flow_mode="brinkman", spinodal=false))]
    fn new(n: usize, dt: f64, flow_mode: &str, spinodal: bool) -> PyResult<Self> {
        let g = Grid2D::unit_square(n).map_err(py_err)?;
        let mut cfg = StepConfig::with_dt(dt);
        cfg.flow_mode = flow_mode.parse::<FlowMode>().map_err(PyValueError::new_err)?;
        let spec = if spinodal {
            harness::spinodal_spec()
        } else {
            ModelSpec::default()
        };
        Self::build(g, spec, cfg)
    }

    /// Advances one step and returns its diagnostics.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let k = self.steps + 1;
        let (next, d) = step(&self.grid, &self.state, &self.spec, &self.cfg)
            .map_err(|source| py_err(Error::Step { step: k, source }))?;
        self.state = next;
        self.steps = k;
        diagnostics_dict(py, &d)
    }

    /// Advances `n` steps; returns the list of per-step diagnostics.
    fn advance<'py>(&mut self, py: Python<'py>, n: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        (0..n).map(|_| self.step(py)).collect()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.state.t
    }

    #[getter]
    fn steps(&self) -> usize {
        self.steps
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.grid)
    }

    /// Cell fields as row-major nested lists, `[j][i]`.
    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        rows(&self.state.phi)
    }

    #[getter]
    fn mu(&self) -> Vec<Vec<f64>> {
        rows(&self.state.mu)
    }

    #[getter]
    fn sigma(&self) -> Vec<Vec<f64>> {
        rows(&self.state.sigma)
    }

    #[getter]
    fn pressure(&self) -> Vec<Vec<f64>> {
        rows(&self.state.p)
    }
}

/// Audits the default model over the standard sample range.
#[pyfunction]
fn validate_default() -> PyResult<PyReport> {
    validate_spec(&ModelSpec::default(), DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES)
        .map(PyReport)
        .map_err(py_err)
}

/// Manufactured-solution sweep for "nutrient", "darcy" or "brinkman".
#[pyfunction]
#[pyo3(signature = (problem, levels=3))]
fn mms<'py>(py: Python<'py>, problem: &str, levels: usize) -> PyResult<Bound<'py, PyDict>> {
    let p = problem.parse::<MmsProblem>().map_err(PyValueError::new_err)?;
    let r = py.detach(|| harness::mms_convergence(p, levels)).map_err(py_err)?;
    sweep_dict(py, &r)
}

/// Robin-to-Dirichlet nutrient gap over `k_values` on an `n`x`n` grid.
#[pyfunction]
#[pyo3(signature = (k_values, n=64))]
fn robin_limit<'py>(py: Python<'py>, k_values: Vec<f64>, n: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| -> Result<SweepResult, Error> {
            let g = Grid2D::unit_square(n)?;
            let spec = harness::growth_spec();
            let phi = harness::smooth_tumour(&g, &spec)?.phi;
            harness::robin_limit_study(&g, &phi, &spec, &k_values)
        })
        .map_err(py_err)?;
    sweep_dict(py, &r)
}

/// Brinkman-to-Darcy gap over viscosity scales at frozen smooth fields.
#[pyfunction]
#[pyo3(signature = (scales, n=64))]
fn viscosity_limit<'py>(py: Python<'py>, scales: Vec<f64>, n: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| -> Result<SweepResult, Error> {
            let g = Grid2D::unit_square(n)?;
            let fields = harness::smooth_frozen_fields(&g);
            harness::viscosity_limit_study(&g, &fields, &harness::viscosity_limit_spec(), &scales)
        })
        .map_err(py_err)?;
    sweep_dict(py, &r)
}

/// Spinodal benchmark diagnostics at step size `dt` up to `t_final`.
#[pyfunction]
#[pyo3(signature = (dt, t_final=0.02))]
fn spinodal<'py>(py: Python<'py>, dt: f64, t_final: f64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let diags = py
        .detach(|| harness::spinodal_run(dt, t_final, FlowMode::Brinkman))
        .map_err(py_err)?;
    diags.iter().map(|d| diagnostics_dict(py, d)).collect()
}

#[pymodule]
fn chb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(validate_default, m)?)?;
    m.add_function(wrap_pyfunction!(mms, m)?)?;
    m.add_function(wrap_pyfunction!(robin_limit, m)?)?;
    m.add_function(wrap_pyfunction!(viscosity_limit, m)?)?;
    m.add_function(wrap_pyfunction!(spinodal, m)?)?;
    Ok(())
}
