//! Python bindings for the DVA shunt analysis toolkit.
//!
//! Thin wrappers over the core types plus free functions returning plain
//! Python data (floats, complex numbers, lists, dicts).

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use shuntlab_core as core;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Model", from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: core::PiezoModel,
}

#[pymethods]
impl PyModel {
    /// Build from resonance frequencies in Hz and capacitance in F.
    #[staticmethod]
    fn from_hertz(f_sc: f64, f_oc: f64, cp: f64) -> PyResult<Self> {
        Ok(Self { inner: core::PiezoModel::from_hertz(f_sc, f_oc, cp).map_err(err)? })
    }

    /// Build from resonance frequencies in rad/s and capacitance in F.
    #[staticmethod]
    fn from_frequencies(omega_sc: f64, omega_oc: f64, cp: f64) -> PyResult<Self> {
        Ok(Self { inner: core::PiezoModel::from_frequencies(omega_sc, omega_oc, cp).map_err(err)? })
    }

    #[staticmethod]
    fn from_modal(omega_sc: f64, kc: f64, cp: f64) -> PyResult<Self> {
        Ok(Self { inner: core::PiezoModel::from_modal(omega_sc, kc, cp).map_err(err)? })
    }

    #[staticmethod]
    fn from_physical(mass: f64, k_oc: f64, theta_p: f64, cp: f64) -> PyResult<Self> {
        Ok(Self { inner: core::PiezoModel::from_physical(mass, k_oc, theta_p, cp).map_err(err)? })
    }

    /// Unit-normalized plant (omega_sc = 1, cp = 1) for a given coupling.
    #[staticmethod]
    fn normalized(kc: f64) -> PyResult<Self> {
        Ok(Self { inner: core::PiezoModel::normalized(kc).map_err(err)? })
    }

    #[getter]
    fn omega_sc(&self) -> f64 {
        self.inner.omega_sc()
    }

    #[getter]
    fn omega_oc(&self) -> f64 {
        self.inner.omega_oc()
    }

    #[getter]
    fn kc(&self) -> f64 {
        self.inner.kc()
    }

    #[getter]
    fn cp_eps(&self) -> f64 {
        self.inner.cp_eps()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(omega_sc={}, kc={}, cp_eps={})",
            self.inner.omega_sc(),
            self.inner.kc(),
            self.inner.cp_eps()
        )
    }
}

#[pyclass(name = "Shunt", from_py_object)]
#[derive(Clone)]
struct PyShunt {
    inner: core::ShuntParams,
}

#[pymethods]
impl PyShunt {
    #[new]
    fn new(inductance: f64, resistance: f64, model: &PyModel) -> PyResult<Self> {
        Ok(Self {
            inner: core::ShuntParams::from_components(inductance, resistance, &model.inner)
                .map_err(err)?,
        })
    }

    #[getter]
    fn inductance(&self) -> f64 {
        self.inner.inductance
    }

    #[getter]
    fn resistance(&self) -> f64 {
        self.inner.resistance
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn zeta(&self) -> f64 {
        self.inner.zeta
    }

    fn __repr__(&self) -> String {
        format!("Shunt(L={}, R={})", self.inner.inductance, self.inner.resistance)
    }
}

/// Rational transfer function with ascending real coefficients.
#[pyclass(name = "Tf", from_py_object)]
#[derive(Clone)]
struct PyTf {
    inner: core::RationalTF,
}

#[pymethods]
impl PyTf {
    #[new]
    fn new(num: Vec<f64>, den: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: core::RationalTF::new(num, den).map_err(err)? })
    }

    #[getter]
    fn num(&self) -> Vec<f64> {
        self.inner.num().to_vec()
    }

    #[getter]
    fn den(&self) -> Vec<f64> {
        self.inner.den().to_vec()
    }

    fn eval(&self, s: Complex64) -> Complex64 {
        self.inner.eval(s)
    }

    fn eval_jomega(&self, omega: f64) -> Complex64 {
        self.inner.eval_jomega(omega)
    }

    fn __repr__(&self) -> String {
        format!("Tf(num={:?}, den={:?})", self.inner.num(), self.inner.den())
    }
}

#[pyclass(name = "DiscreteTf")]
struct PyDiscreteTf {
    inner: core::DiscreteTF,
}

#[pymethods]
impl PyDiscreteTf {
    #[getter]
    fn num_z(&self) -> Vec<f64> {
        self.inner.num_z().to_vec()
    }

    #[getter]
    fn den_z(&self) -> Vec<f64> {
        self.inner.den_z().to_vec()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    /// One recurrence update (the output is held until the next sample).
    fn step(&mut self, input: f64) -> f64 {
        self.inner.step(input)
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    fn eval_z(&self, z: Complex64) -> Complex64 {
        self.inner.eval_z(z)
    }
}

fn parse_variant(variant: &str) -> PyResult<core::DelayVariant> {
    match variant {
        "zoh" => Ok(core::DelayVariant::Zoh),
        "pure" | "pure_delay" => Ok(core::DelayVariant::PureDelay),
        other => Err(PyValueError::new_err(format!(
            "unknown delay variant {other:?}; use 'zoh' or 'pure'"
        ))),
    }
}

fn parse_delay(variant: &str, tau: f64) -> PyResult<core::DelayModel> {
    match variant {
        "none" => Ok(core::DelayModel::None),
        "zoh" => Ok(core::DelayModel::Zoh(tau)),
        "pure" | "pure_delay" => Ok(core::DelayModel::PureDelay(tau)),
        other => Err(PyValueError::new_err(format!(
            "unknown delay variant {other:?}; use 'none', 'zoh' or 'pure'"
        ))),
    }
}

#[pyfunction]
fn eemcf(omega_sc: f64, omega_oc: f64) -> PyResult<f64> {
    core::eemcf(omega_sc, omega_oc).map_err(err)
}

#[pyfunction]
fn tune_series_rl(model: &PyModel) -> PyResult<PyShunt> {
    Ok(PyShunt { inner: core::tune_series_rl(&model.inner).map_err(err)? })
}

#[pyfunction]
fn tune_series_rl_linearized(model: &PyModel) -> PyShunt {
    PyShunt { inner: core::tune_series_rl_linearized(&model.inner) }
}

#[pyfunction]
fn shunt_admittance(shunt: &PyShunt) -> PyResult<PyTf> {
    Ok(PyTf { inner: core::shunt_admittance(&shunt.inner).map_err(err)? })
}

#[pyfunction]
fn dynamic_capacitance(model: &PyModel) -> PyTf {
    PyTf { inner: core::dynamic_capacitance(&model.inner) }
}

#[pyfunction]
fn open_loop_tf(model: &PyModel, shunt: &PyShunt) -> PyResult<PyTf> {
    Ok(PyTf { inner: core::open_loop_tf(&model.inner, &shunt.inner).map_err(err)? })
}

#[pyfunction]
fn zoh_response(tau: f64, s: Complex64) -> Complex64 {
    core::zoh_response(tau, s)
}

#[pyfunction]
fn delayed_admittance(y: &PyTf, tau: f64, omega: f64) -> Complex64 {
    core::delayed_admittance(&y.inner, tau, omega)
}

#[pyfunction]
fn passivity_loss_delay(model: &PyModel) -> f64 {
    core::passivity_loss_delay(&model.inner)
}

#[pyfunction]
#[pyo3(signature = (model, shunt, start=None, stop=None, points=10_000))]
fn stability_margins(
    py: Python<'_>,
    model: &PyModel,
    shunt: &PyShunt,
    start: Option<f64>,
    stop: Option<f64>,
    points: usize,
) -> PyResult<Py<PyDict>> {
    let h = core::open_loop_tf(&model.inner, &shunt.inner).map_err(err)?;
    let grid = core::FreqGrid::log(
        start.unwrap_or(0.01 * model.inner.omega_sc()),
        stop.unwrap_or(100.0 * model.inner.omega_sc()),
        points,
    );
    let report = core::stability_margins(&h, &grid).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("gain_crossovers", report.gain_crossovers)?;
    d.set_item("phase_margin_deg", report.phase_margin_deg)?;
    d.set_item(
        "gain_margin_db",
        report.gain_margin_db.is_finite().then_some(report.gain_margin_db),
    )?;
    Ok(d.into())
}

#[pyfunction]
#[pyo3(signature = (model, admittance, variant, tau, start, stop, points, log=false))]
#[allow(clippy::too_many_arguments)]
fn closed_loop_frf(
    py: Python<'_>,
    model: &PyModel,
    admittance: &PyTf,
    variant: &str,
    tau: f64,
    start: f64,
    stop: f64,
    points: usize,
    log: bool,
) -> PyResult<Py<PyDict>> {
    let delay = parse_delay(variant, tau)?;
    let grid = if log {
        core::FreqGrid::log(start, stop, points)
    } else {
        core::FreqGrid::linear(start, stop, points)
    };
    let curve = core::closed_loop_frf(&model.inner, &admittance.inner, &delay, &grid).map_err(err)?;
    let peaks = core::find_frf_peaks(&curve);
    let d = PyDict::new(py);
    d.set_item("omega", curve.omega.clone())?;
    d.set_item("value", curve.value.clone())?;
    d.set_item("warning", curve.warning.clone())?;
    d.set_item(
        "peaks",
        peaks.iter().map(|p| (p.omega, p.amplitude)).collect::<Vec<_>>(),
    )?;
    Ok(d.into())
}

#[pyfunction]
fn nominal_poles(model: &PyModel, shunt: &PyShunt) -> PyResult<Vec<Complex64>> {
    core::nominal_poles(&model.inner, &shunt.inner).map_err(err)
}

#[pyfunction]
fn admittance_poles(model: &PyModel, admittance: &PyTf) -> PyResult<Vec<Complex64>> {
    core::admittance_poles(&model.inner, &admittance.inner).map_err(err)
}

#[pyfunction]
fn root_locus(
    py: Python<'_>,
    model: &PyModel,
    shunt: &PyShunt,
    variant: &str,
    tau_max: f64,
    dtau: f64,
) -> PyResult<Py<PyDict>> {
    let locus = core::root_locus(&model.inner, &shunt.inner, parse_variant(variant)?, tau_max, dtau)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("taus", locus.taus.clone())?;
    d.set_item("poles", locus.poles.clone())?;
    d.set_item("crossing", locus.crossing)?;
    Ok(d.into())
}

fn critical_dict(py: Python<'_>, c: core::CriticalDelayResult) -> PyResult<Py<PyDict>> {
    let d = PyDict::new(py);
    d.set_item("omega_c", c.omega_c)?;
    d.set_item("tau_c", c.tau_c)?;
    d.set_item("branch_k", c.branch_k)?;
    d.set_item(
        "method",
        match c.method {
            core::CriticalMethod::ZohNumeric => "zoh",
            core::CriticalMethod::PureDelayNumeric => "pure_delay",
            core::CriticalMethod::Series => "series",
        },
    )?;
    Ok(d.into())
}

#[pyfunction]
fn critical_delay_numeric(
    py: Python<'_>,
    model: &PyModel,
    shunt: &PyShunt,
    variant: &str,
) -> PyResult<Py<PyDict>> {
    let c = core::critical_delay_numeric(&model.inner, &shunt.inner, parse_variant(variant)?)
        .map_err(err)?;
    critical_dict(py, c)
}

#[pyfunction]
fn critical_delay_series(py: Python<'_>, kc: f64, omega_sc: f64) -> PyResult<Py<PyDict>> {
    critical_dict(py, core::critical_delay_series(kc, omega_sc).map_err(err)?)
}

#[pyfunction]
fn max_sampling_period(kc: f64, omega_sc: f64, modified: bool) -> PyResult<f64> {
    core::max_sampling_period(kc, omega_sc, modified).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, admittance, tau, pinned_index=0))]
fn stabilize(
    py: Python<'_>,
    model: &PyModel,
    admittance: &PyTf,
    tau: f64,
    pinned_index: usize,
) -> PyResult<Py<PyDict>> {
    let poles = core::admittance_poles(&model.inner, &admittance.inner).map_err(err)?;
    let system = core::build_modification_system(&admittance.inner, &poles, tau).map_err(err)?;
    let factors = core::solve_modification(&system, &admittance.inner, pinned_index).map_err(err)?;
    let y_mod = core::apply_modification(&admittance.inner, &factors).map_err(err)?;
    let check = core::verify_pole_placement(&model.inner, &y_mod, tau, &poles).map_err(err)?;

    let d = PyDict::new(py);
    d.set_item("delta_b", factors.delta_b.clone())?;
    d.set_item("delta_a", factors.delta_a.clone())?;
    d.set_item("residual_norm", factors.residual_norm)?;
    d.set_item("degenerate", factors.degenerate)?;
    d.set_item("modified", PyTf { inner: y_mod }.into_pyobject(py)?)?;
    d.set_item("target_poles", poles)?;
    d.set_item("placement_residuals", check.residuals.clone())?;
    d.set_item("pole_displacements", check.displacements.clone())?;
    d.set_item("max_delayed_pole_real_part", check.max_resolved_real_part())?;
    d.set_item("stable", check.max_resolved_real_part() < 0.0)?;
    Ok(d.into())
}

#[pyfunction]
fn verify_pole_placement(
    py: Python<'_>,
    model: &PyModel,
    admittance: &PyTf,
    tau: f64,
    targets: Vec<Complex64>,
) -> PyResult<Py<PyDict>> {
    let check = core::verify_pole_placement(&model.inner, &admittance.inner, tau, &targets)
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("residuals", check.residuals.clone())?;
    d.set_item("resolved", check.resolved.clone())?;
    d.set_item("displacements", check.displacements.clone())?;
    d.set_item("max_resolved_real_part", check.max_resolved_real_part())?;
    Ok(d.into())
}

#[pyfunction]
fn tustin_discretize(y: &PyTf, tau: f64) -> PyResult<PyDiscreteTf> {
    Ok(PyDiscreteTf { inner: core::tustin_discretize(&y.inner, tau).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (model, admittance, tau, f_start, f_end, duration, amplitude=1.0, law="linear", substeps=32))]
#[allow(clippy::too_many_arguments)]
fn simulate_swept_sine(
    py: Python<'_>,
    model: &PyModel,
    admittance: &PyTf,
    tau: f64,
    f_start: f64,
    f_end: f64,
    duration: f64,
    amplitude: f64,
    law: &str,
    substeps: usize,
) -> PyResult<Py<PyDict>> {
    let sweep = core::SweepConfig {
        f_start,
        f_end,
        duration,
        amplitude,
        law: match law {
            "linear" => core::SweepLaw::Linear,
            "logarithmic" | "log" => core::SweepLaw::Logarithmic,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown sweep law {other:?}; use 'linear' or 'logarithmic'"
                )))
            }
        },
    };
    let ctrl = core::tustin_discretize(&admittance.inner, tau).map_err(err)?;
    let sim = core::simulate_swept_sine(&model.inner, &ctrl, tau, &sweep, substeps).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("t", sim.t.clone())?;
    d.set_item("x", sim.x.clone())?;
    d.set_item("v_piezo", sim.v_piezo.clone())?;
    d.set_item("i_inject", sim.i_inject.clone())?;
    d.set_item("envelope", sim.envelope.clone())?;
    d.set_item("stable", sim.stable)?;
    Ok(d.into())
}

#[pymodule]
fn shuntlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyShunt>()?;
    m.add_class::<PyTf>()?;
    m.add_class::<PyDiscreteTf>()?;
    m.add_function(wrap_pyfunction!(eemcf, m)?)?;
    m.add_function(wrap_pyfunction!(tune_series_rl, m)?)?;
    m.add_function(wrap_pyfunction!(tune_series_rl_linearized, m)?)?;
    m.add_function(wrap_pyfunction!(shunt_admittance, m)?)?;
    m.add_function(wrap_pyfunction!(dynamic_capacitance, m)?)?;
    m.add_function(wrap_pyfunction!(open_loop_tf, m)?)?;
    m.add_function(wrap_pyfunction!(zoh_response, m)?)?;
    m.add_function(wrap_pyfunction!(delayed_admittance, m)?)?;
    m.add_function(wrap_pyfunction!(passivity_loss_delay, m)?)?;
    m.add_function(wrap_pyfunction!(stability_margins, m)?)?;
    m.add_function(wrap_pyfunction!(closed_loop_frf, m)?)?;
    m.add_function(wrap_pyfunction!(nominal_poles, m)?)?;
    m.add_function(wrap_pyfunction!(admittance_poles, m)?)?;
    m.add_function(wrap_pyfunction!(root_locus, m)?)?;
    m.add_function(wrap_pyfunction!(critical_delay_numeric, m)?)?;
    m.add_function(wrap_pyfunction!(critical_delay_series, m)?)?;
    m.add_function(wrap_pyfunction!(max_sampling_period, m)?)?;
    m.add_function(wrap_pyfunction!(stabilize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_pole_placement, m)?)?;
    m.add_function(wrap_pyfunction!(tustin_discretize, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_swept_sine, m)?)?;
    Ok(())
}
