//! Python module exposing the parse -> simulate -> discretize -> verify
//! pipeline plus the scalar quantizer and linkage helpers.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pneulogic::fsm::{
    discretize_trace, extract_sequence, logic_simulate, parse_chart, synthesize, verify,
    AbstractMachine, StateTransitionChart, SynthesisProblem,
};
use pneulogic::logic::{self, HystMemory};
use pneulogic::netlist;
use pneulogic::sim::{simulate, CircuitModel, MonitorSpec, SimConfig, Trace};
use pneulogic::valve::{self, SliderCrankGeometry};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl ToString) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Widens bits so pyo3 maps them to `list[int]` rather than `bytes`.
fn bits_out(bits: Vec<u8>) -> Vec<u16> {
    bits.into_iter().map(u16::from).collect()
}

fn states_out(states: Vec<Vec<u8>>) -> Vec<Vec<u16>> {
    states.into_iter().map(bits_out).collect()
}

/// 1 iff the pressure has reached the threshold.
#[pyfunction]
fn discretize_binary(p: f64, threshold: f64) -> PyResult<u8> {
    logic::discretize_binary(p, threshold).map_err(value_err)
}

/// Thermometer code over two thresholds, most significant bit first.
#[pyfunction]
fn discretize_ternary(p: f64, lower: f64, upper: f64) -> PyResult<Vec<u16>> {
    logic::discretize_ternary(p, lower, upper).map(|level| bits_out(level.bits())).map_err(value_err)
}

/// One step of the hysteresis band: returns `(bit, next_memory)`.
#[pyfunction]
fn hysteretic_step(memory: u8, p: f64, low: f64, high: f64) -> PyResult<(u8, u8)> {
    let (bit, next) =
        logic::hysteretic_step(HystMemory::new(memory), p, low, high).map_err(value_err)?;
    Ok((bit, next.bit()))
}

/// Slider distance at which the crank reaches its critical angle.
#[pyfunction]
fn critical_distance(l_ab: f64, l_bc: f64, s0: f64, theta_crit_deg: f64) -> PyResult<f64> {
    let geom = SliderCrankGeometry::new(l_ab, l_bc, s0, theta_crit_deg).map_err(value_err)?;
    Ok(valve::critical_distance(&geom))
}

/// Crank angle in degrees for a slider at distance `s`.
#[pyfunction]
fn crank_angle(l_ab: f64, l_bc: f64, s0: f64, theta_crit_deg: f64, s: f64) -> PyResult<f64> {
    let geom = SliderCrankGeometry::new(l_ab, l_bc, s0, theta_crit_deg).map_err(value_err)?;
    valve::crank_angle(&geom, s).map_err(value_err)
}

#[pyclass]
struct Circuit {
    inner: CircuitModel,
}

#[pymethods]
impl Circuit {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let result = netlist::parse(text);
        if result.has_errors() {
            return Err(value_err(result.render_diagnostics("<netlist>").trim_end()));
        }
        Ok(Circuit { inner: result.circuit.expect("error-free parse yields a circuit") })
    }

    fn serialize(&self) -> String {
        netlist::serialize(&self.inner)
    }

    #[getter]
    fn actuators(&self) -> Vec<String> {
        self.inner.actuators.iter().map(|a| a.id.clone()).collect()
    }

    #[getter]
    fn valves(&self) -> Vec<String> {
        self.inner.valves.iter().map(|v| v.id.clone()).collect()
    }

    #[getter]
    fn monitors(&self) -> Vec<(String, String)> {
        self.inner.monitors.iter().map(|m| (m.actuator.clone(), m.label.clone())).collect()
    }

    #[pyo3(signature = (t_end=30.0, dt_max=0.01))]
    fn simulate(&self, t_end: f64, dt_max: f64) -> PyResult<PyTrace> {
        let cfg = SimConfig { t_end, dt_max, ..SimConfig::default() };
        let trace = simulate(&self.inner, &cfg).map_err(runtime_err)?;
        Ok(PyTrace { trace, monitors: self.inner.monitors.clone() })
    }

    /// Cycle of monitor-bit states from the quantized machine.
    fn quantized_cycle(&self) -> PyResult<Vec<Vec<u16>>> {
        let machine = AbstractMachine::from_circuit(&self.inner).map_err(value_err)?;
        logic_simulate(&machine).map(states_out).map_err(runtime_err)
    }
}

#[pyclass(name = "Trace")]
struct PyTrace {
    trace: Trace,
    monitors: Vec<MonitorSpec>,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn end_time(&self) -> f64 {
        self.trace.end_time()
    }

    fn csv(&self) -> String {
        self.trace.to_csv()
    }

    fn switch_times(&self, valve: &str) -> Vec<f64> {
        self.trace.switch_times(valve)
    }

    /// Dwell-filtered sequence of monitor-bit states.
    #[pyo3(signature = (dwell=0.05))]
    fn sequence(&self, dwell: f64) -> PyResult<Vec<Vec<u16>>> {
        let discrete = discretize_trace(&self.trace, &self.monitors).map_err(value_err)?;
        Ok(states_out(extract_sequence(&discrete, dwell)))
    }

    fn signals(&self) -> Vec<(String, String)> {
        self.monitors.iter().map(|m| (m.actuator.clone(), m.label.clone())).collect()
    }
}

#[pyclass(name = "Chart")]
struct PyChart {
    inner: StateTransitionChart,
}

#[pymethods]
impl PyChart {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let result = parse_chart(text);
        if result.has_errors() {
            return Err(value_err(result.render_diagnostics("<chart>").trim_end()));
        }
        Ok(PyChart { inner: result.chart.expect("error-free parse yields a chart") })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    fn signals(&self) -> Vec<(String, String)> {
        self.inner.signals.clone()
    }

    fn cycle(&self) -> Vec<Vec<u16>> {
        states_out(self.inner.cycle_bits())
    }

    /// Returns `(passed, report_line)` for an observed state sequence.
    #[pyo3(name = "verify")]
    fn verify_sequence(&self, sequence: Vec<Vec<u8>>) -> PyResult<(bool, String)> {
        let report = verify(&sequence, &self.inner).map_err(value_err)?;
        Ok((report.passed(), report.render(&self.inner)))
    }

    /// Rendered valve networks realizing this chart, best ranked first.
    fn synthesize(&self) -> PyResult<Vec<String>> {
        let problem = SynthesisProblem::from_chart(&self.inner).map_err(value_err)?;
        let solutions = synthesize(&problem).map_err(value_err)?;
        Ok(solutions.iter().map(|s| s.render()).collect())
    }
}

#[pymodule(name = "pneulogic")]
fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(discretize_binary, m)?)?;
    m.add_function(wrap_pyfunction!(discretize_ternary, m)?)?;
    m.add_function(wrap_pyfunction!(hysteretic_step, m)?)?;
    m.add_function(wrap_pyfunction!(critical_distance, m)?)?;
    m.add_function(wrap_pyfunction!(crank_angle, m)?)?;
    m.add_class::<Circuit>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyChart>()?;
    Ok(())
}
