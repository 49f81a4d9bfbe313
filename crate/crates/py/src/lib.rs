use std::sync::Arc;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use washboard::analytic::{self, TwoPathInputs};
use washboard::experiments::{self, Ensemble, FringeScanSpec, SimOptions};
use washboard::lattice::deg_to_rad;
use washboard::stationary::solve_static;
use washboard::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NonFinite { .. } | Error::Io(_) | Error::DepthFailed { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "LatticeParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyLatticeParams(washboard::LatticeParams);

#[pymethods]
impl PyLatticeParams {
    /// Depth `r` and tilt `s` in recoil units; `omega_r` in rad/s.
    #[new]
    #[pyo3(signature = (r=19.0, s=2.86, omega_r=None))]
    fn new(r: f64, s: f64, omega_r: Option<f64>) -> PyResult<Self> {
        let reference = washboard::LatticeParams::reference();
        let p = washboard::LatticeParams::new(r, s, omega_r.unwrap_or(reference.omega_r), reference.a, reference.mass)
            .map_err(to_py)?;
        Ok(Self(p))
    }

    #[getter]
    fn r(&self) -> f64 {
        self.0.r
    }

    #[getter]
    fn s(&self) -> f64 {
        self.0.s
    }

    #[getter]
    fn omega_r(&self) -> f64 {
        self.0.omega_r
    }

    fn potential(&self, x: f64) -> f64 {
        self.0.static_potential(x)
    }

    fn __repr__(&self) -> String {
        format!("LatticeParams(r={}, s={}, omega_r={})", self.0.r, self.0.s, self.0.omega_r)
    }
}

#[pyclass(name = "DriveSchedule", frozen, from_py_object)]
#[derive(Clone)]
struct PyDriveSchedule(washboard::DriveSchedule);

#[pymethods]
impl PyDriveSchedule {
    /// `a_pm` in radians, `omega` in rad/s, `delta_tau` in seconds.
    #[new]
    #[pyo3(signature = (a_pm, a_am, omega, n, delta_tau=0.0))]
    fn new(a_pm: f64, a_am: f64, omega: f64, n: u32, delta_tau: f64) -> PyResult<Self> {
        washboard::DriveSchedule::new(a_pm, a_am, omega, n, delta_tau).map(Self).map_err(to_py)
    }

    #[getter]
    fn a_pm(&self) -> f64 {
        self.0.a_pm
    }

    #[getter]
    fn a_am(&self) -> f64 {
        self.0.a_am
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.0.omega
    }

    #[getter]
    fn n(&self) -> u32 {
        self.0.n
    }

    #[getter]
    fn delta_tau(&self) -> f64 {
        self.0.delta_tau
    }

    fn end_time(&self) -> f64 {
        self.0.end_time()
    }

    fn with_delta_tau(&self, delta_tau: f64) -> PyResult<Self> {
        self.0.with_delta_tau(delta_tau).map(Self).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let d = &self.0;
        format!("DriveSchedule(a_pm={}, a_am={}, omega={}, n={}, delta_tau={})", d.a_pm, d.a_am, d.omega, d.n, d.delta_tau)
    }
}

#[pyclass(name = "SpectralGrid", frozen)]
struct PyGrid(Arc<washboard::SpectralGrid>);

#[pymethods]
impl PyGrid {
    /// Rounds the point count up to a power of two.
    #[new]
    #[pyo3(signature = (n_wells=17, points_per_well=64))]
    fn new(n_wells: usize, points_per_well: usize) -> PyResult<Self> {
        washboard::SpectralGrid::auto(n_wells, points_per_well).map(Self).map_err(to_py)
    }

    #[getter]
    fn n_points(&self) -> usize {
        self.0.n_points()
    }

    #[getter]
    fn n_wells(&self) -> usize {
        self.0.n_wells()
    }

    fn x(&self) -> Vec<f64> {
        self.0.x().to_vec()
    }
}

#[pyclass(name = "PopulationReport", frozen, get_all, from_py_object)]
#[derive(Clone)]
struct PyReport {
    p_g: f64,
    p_e: f64,
    p_l: f64,
    leak_intra: f64,
    leak_inter: f64,
    leak_absorbed: f64,
}

impl From<washboard::PopulationReport> for PyReport {
    fn from(r: washboard::PopulationReport) -> Self {
        Self {
            p_g: r.p_g,
            p_e: r.p_e,
            p_l: r.p_l,
            leak_intra: r.leak_intra,
            leak_inter: r.leak_inter,
            leak_absorbed: r.leak_absorbed,
        }
    }
}

#[pymethods]
impl PyReport {
    /// `P_e / P_L`; infinite when leakage is negligible.
    fn branching_ratio(&self) -> f64 {
        if self.p_l < washboard::measurement::LEAKAGE_FLOOR {
            f64::INFINITY
        } else {
            self.p_e / self.p_l
        }
    }

    fn __repr__(&self) -> String {
        format!("PopulationReport(P_g={:.6}, P_e={:.6}, P_L={:.6})", self.p_g, self.p_e, self.p_l)
    }
}

#[pyclass(name = "StateBasis", frozen)]
struct PyBasis(washboard::StateBasis);

#[pymethods]
impl PyBasis {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn qubit_splitting(&self) -> f64 {
        self.0.qubit_splitting()
    }

    #[getter]
    fn qubit_ground(&self) -> usize {
        self.0.qubit_ground()
    }

    #[getter]
    fn qubit_excited(&self) -> usize {
        self.0.qubit_excited()
    }

    fn energies(&self) -> Vec<f64> {
        self.0.states().iter().map(|s| s.energy).collect()
    }

    /// `(well_index, intra_well_rank)` of each state.
    fn labels(&self) -> Vec<(i64, usize)> {
        self.0.states().iter().map(|s| (s.well_index, s.intra_well_rank)).collect()
    }

    fn wavefunction(&self, index: usize) -> PyResult<Vec<Complex64>> {
        self.0
            .states()
            .get(index)
            .map(|s| s.wavefunction.amplitudes().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("no state {index}")))
    }

    fn residual(&self, index: usize) -> PyResult<f64> {
        self.0.residual(index).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }
}

#[pyfunction]
fn solve(params: &PyLatticeParams, grid: &PyGrid) -> PyResult<PyBasis> {
    solve_static(&params.0, &grid.0).map(PyBasis).map_err(to_py)
}

/// Single-depth simulator with default stepping and absorber.
#[pyclass(name = "Simulator", frozen)]
struct PySimulator(Ensemble);

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (params, grid, steps_per_period=None))]
    fn new(py: Python<'_>, params: &PyLatticeParams, grid: &PyGrid, steps_per_period: Option<usize>) -> PyResult<Self> {
        let mut opts = SimOptions::default();
        if let Some(n) = steps_per_period {
            opts.steps_per_period = n;
        }
        let (p, g) = (params.0, grid.0.clone());
        py.detach(|| Ensemble::single(&p, &g, opts)).map(Self).map_err(to_py)
    }

    #[getter]
    fn qubit_splitting(&self) -> f64 {
        self.0.members()[0].1.basis().qubit_splitting()
    }

    /// Runs from the qubit ground state and measures at `t_end` (default:
    /// end of the drives).
    #[pyo3(signature = (drive, t_end=None))]
    fn run(&self, py: Python<'_>, drive: &PyDriveSchedule, t_end: Option<f64>) -> PyResult<PyReport> {
        let d = drive.0;
        py.detach(|| self.0.run(&d, t_end)).map(PyReport::from).map_err(to_py)
    }

    /// `(delta_tau, P_L)` over one fringe period, all measured at a common time.
    fn fringe(&self, py: Python<'_>, drive: &PyDriveSchedule, points: usize) -> PyResult<Vec<(f64, f64)>> {
        let d = drive.0;
        py.detach(|| {
            let spec = FringeScanSpec::one_period(d, points)?;
            experiments::run_fringe(&self.0, &spec).map(|t| t.leakage_samples())
        })
        .map_err(to_py)
    }
}

/// `(offset, amplitude, phase, residual_rms)` of `offset + amplitude cos(2 pi f t + phase)`.
#[pyfunction]
fn fit_fringe(samples: Vec<(f64, f64)>, fixed_freq: f64) -> PyResult<(f64, f64, f64, f64)> {
    let fit = analytic::fit_fringe(&samples, fixed_freq).map_err(to_py)?;
    Ok((fit.offset, fit.amplitude, fit.phase, fit.residual_rms))
}

#[pyfunction]
fn two_path_extrema(p_pm: f64, p_am: f64) -> PyResult<(f64, f64)> {
    Ok(analytic::two_path_extrema(TwoPathInputs::new(p_pm, p_am).map_err(to_py)?))
}

#[pyfunction]
fn visibility(p_max: f64, p_min: f64) -> PyResult<f64> {
    analytic::visibility(p_max, p_min).map_err(to_py)
}

#[pyfunction]
fn two_path_visibility_curve(log2_ratio: f64) -> f64 {
    analytic::two_path_visibility_curve(log2_ratio)
}

#[pyfunction(name = "deg_to_rad")]
fn py_deg_to_rad(deg: f64) -> f64 {
    deg_to_rad(deg)
}

#[pymodule]
fn washboard_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLatticeParams>()?;
    m.add_class::<PyDriveSchedule>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyBasis>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fringe, m)?)?;
    m.add_function(wrap_pyfunction!(two_path_extrema, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(two_path_visibility_curve, m)?)?;
    m.add_function(wrap_pyfunction!(py_deg_to_rad, m)?)?;
    Ok(())
}
