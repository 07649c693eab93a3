//! Python bindings for the hvpair simulator.
//!
//! Angles are radians, times picoseconds. Reports and scan results are
//! returned as plain dicts with the same layout as the JSON outputs.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;

use hvpair::coincidence::{self as co, AnalysisConfig, Role};
use hvpair::experiment::{self as ex, ExperimentConfig};
use hvpair::optics::HwpConvention;
use hvpair::predictions::{self as pr, Distinguishability, RateQuad, VisibilityPair};
use hvpair::setups::{Plate, Setup, SOURCE_PATH};
use hvpair::source::{self, CalibrationAnchor, SourceCalibration};
use hvpair::timetag::{self, TimeTagRecord};
use hvpair::Error;

create_exception!(hvpair_py, HvpairError, PyException, "Model or data error raised by hvpair.");

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::Config(_) | Error::OutOfRange { .. } | Error::Domain(_) | Error::Format { .. } | Error::Stream(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => HvpairError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn visibility(v_rect: f64, v_diag: f64) -> PyResult<VisibilityPair> {
    VisibilityPair::new(v_rect, v_diag).map_err(err)
}

fn records(stream: Vec<(u64, u8)>) -> Vec<TimeTagRecord> {
    stream.into_iter().map(|(t, c)| TimeTagRecord::new(t, c)).collect()
}

fn tuples(stream: &[TimeTagRecord]) -> Vec<(u64, u8)> {
    stream.iter().map(|r| (r.timestamp, r.channel)).collect()
}

fn roles(name: &str) -> PyResult<Vec<Role>> {
    match name {
        "bell" => Ok(Role::BELL.to_vec()),
        "coalescence" => Ok(Role::COALESCENCE.to_vec()),
        other => Err(PyValueError::new_err(format!("unknown role set {other:?}"))),
    }
}

fn convention(name: &str) -> PyResult<HwpConvention> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown HWP convention {name:?}")))
}

/// Bell-setup rates `(r_pp, r_pm, r_mp, r_mm)` in the difference-angle form.
#[pyfunction]
#[pyo3(signature = (alpha, beta, r0 = 1.0, v_rect = 1.0, v_diag = 1.0))]
fn singlet_rates(alpha: f64, beta: f64, r0: f64, v_rect: f64, v_diag: f64) -> PyResult<[f64; 4]> {
    Ok(pr::singlet_rates(alpha, beta, r0, visibility(v_rect, v_diag)?).map_err(err)?.as_array())
}

/// Bell-setup rates `(r_pp, r_pm, r_mp, r_mm)` in the sum-angle form.
#[pyfunction]
#[pyo3(signature = (alpha, beta, r0 = 1.0, v_rect = 1.0, v_diag = 1.0))]
fn sum_angle_rates(alpha: f64, beta: f64, r0: f64, v_rect: f64, v_diag: f64) -> PyResult<[f64; 4]> {
    Ok(pr::sum_angle_rates(alpha, beta, r0, visibility(v_rect, v_diag)?).map_err(err)?.as_array())
}

#[pyfunction]
fn correlation(r_pp: f64, r_pm: f64, r_mp: f64, r_mm: f64) -> PyResult<f64> {
    pr::correlation(&RateQuad::new(r_pp, r_pm, r_mp, r_mm).map_err(err)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (v_rect = 1.0, v_diag = 1.0))]
fn chsh_from_visibility(v_rect: f64, v_diag: f64) -> PyResult<f64> {
    Ok(pr::chsh_from_visibility(visibility(v_rect, v_diag)?))
}

#[pyfunction]
#[pyo3(signature = (theta, r0 = 1.0, distinguishable = false))]
fn doubles_rate(theta: f64, r0: f64, distinguishable: bool) -> PyResult<f64> {
    let mode = if distinguishable {
        Distinguishability::Distinguishable
    } else {
        Distinguishability::Indistinguishable
    };
    pr::doubles_rate(theta, r0, mode).map_err(err)
}

/// Source parameters over temperature, piecewise-linear between anchors.
#[pyclass(name = "SourceCalibration", frozen)]
struct PyCalibration(SourceCalibration);

#[pymethods]
impl PyCalibration {
    #[new]
    #[pyo3(signature = (peak_rate = source::DEFAULT_PEAK_PAIR_RATE))]
    fn new(peak_rate: f64) -> Self {
        PyCalibration(SourceCalibration::default_with_rate(peak_rate))
    }

    /// Builds a calibration from a JSON list of anchors with keys
    /// `temperature_c`, `exchange_phase`, `degeneracy_weight`, `pair_rate`
    /// and optionally `visibility`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let anchors: Vec<CalibrationAnchor> =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        SourceCalibration::new(anchors).map(PyCalibration).map_err(err)
    }

    fn range(&self) -> (f64, f64) {
        self.0.range()
    }

    /// Source point at `temperature_c` as a dict.
    fn at<'py>(&self, py: Python<'py>, temperature_c: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.at(temperature_c).map_err(err)?)
    }

    /// `E(π/8, π/8)` through the full pipeline at each temperature.
    fn diagonal_correlation(&self, temperatures: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        source::diagonal_correlation_curve(&self.0, &temperatures).map_err(err)
    }

    /// Exact per-pair rates of the Bell setup at `(alpha, beta)`.
    #[pyo3(signature = (alpha, beta, temperature_c, efficiency = 1.0, hwp_convention = "paper"))]
    fn bell_probabilities<'py>(
        &self,
        py: Python<'py>,
        alpha: f64,
        beta: f64,
        temperature_c: f64,
        efficiency: f64,
        hwp_convention: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let setup = Setup::bell(alpha, beta, convention(hwp_convention)?).map_err(err)?;
        self.probabilities(py, &setup, temperature_c, efficiency)
    }

    /// Exact per-pair rates of the coalescence setup with a plate at `theta`.
    #[pyo3(signature = (theta, temperature_c, plate = "hwp", efficiency = 1.0, hwp_convention = "paper"))]
    fn coalescence_probabilities<'py>(
        &self,
        py: Python<'py>,
        theta: f64,
        temperature_c: f64,
        plate: &str,
        efficiency: f64,
        hwp_convention: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let plate = match plate {
            "hwp" => Plate::Hwp,
            "qwp" => Plate::Qwp,
            other => return Err(PyValueError::new_err(format!("unknown plate {other:?}"))),
        };
        let setup = Setup::coalescence(theta, plate, convention(hwp_convention)?).map_err(err)?;
        self.probabilities(py, &setup, temperature_c, efficiency)
    }
}

impl PyCalibration {
    fn probabilities<'py>(
        &self,
        py: Python<'py>,
        setup: &Setup,
        temperature_c: f64,
        efficiency: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ensemble = source::source_state(&self.0, temperature_c, setup.modes(), SOURCE_PATH).map_err(err)?;
        let probs = setup
            .exact_rates(&ensemble, &vec![efficiency; setup.channel_count()])
            .map_err(err)?;
        to_py(py, &probs.role_rates())
    }
}

fn analysis(window_ps: u64, offsets_ps: Option<Vec<i64>>, bin_length_s: f64, role_set: &str) -> PyResult<AnalysisConfig> {
    let cfg = AnalysisConfig {
        window_ps,
        offsets_ps: offsets_ps.unwrap_or_default(),
        bin_length_s,
        channel_roles: roles(role_set)?,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Streaming coincidence counter over time-ordered `(timestamp, channel)` records.
#[pyclass(name = "CoincidenceCounter")]
struct PyCounter(Option<co::CoincidenceCounter>);

#[pymethods]
impl PyCounter {
    #[new]
    #[pyo3(signature = (window_ps = 2000, offsets_ps = None, bin_length_s = 1.0, roles = "bell"))]
    fn new(window_ps: u64, offsets_ps: Option<Vec<i64>>, bin_length_s: f64, roles: &str) -> PyResult<Self> {
        let cfg = analysis(window_ps, offsets_ps, bin_length_s, roles)?;
        Ok(PyCounter(Some(co::CoincidenceCounter::new(&cfg).map_err(err)?)))
    }

    fn push(&mut self, records: Vec<(u64, u8)>) -> PyResult<()> {
        let c = self.0.as_mut().ok_or_else(|| PyValueError::new_err("counter already finished"))?;
        c.push_all(self::records(records)).map_err(err)
    }

    fn finish<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        let c = self.0.take().ok_or_else(|| PyValueError::new_err("counter already finished"))?;
        to_py(py, &c.finish())
    }
}

#[pyfunction]
#[pyo3(signature = (records, window_ps = 2000, offsets_ps = None, bin_length_s = 1.0, roles = "bell"))]
fn count_coincidences<'py>(
    py: Python<'py>,
    records: Vec<(u64, u8)>,
    window_ps: u64,
    offsets_ps: Option<Vec<i64>>,
    bin_length_s: f64,
    roles: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = analysis(window_ps, offsets_ps, bin_length_s, roles)?;
    let report = co::count_coincidences(&self::records(records), &cfg).map_err(err)?;
    to_py(py, &report)
}

/// Returns `(channel_count, records)`.
#[pyfunction]
fn read_ttag(path: std::path::PathBuf) -> PyResult<(u16, Vec<(u64, u8)>)> {
    let (header, stream) = timetag::read_ttag(path).map_err(err)?;
    Ok((header.channel_count, tuples(&stream)))
}

#[pyfunction]
fn write_ttag(path: std::path::PathBuf, records: Vec<(u64, u8)>, channel_count: u16) -> PyResult<()> {
    timetag::write_ttag(&self::records(records), channel_count, path).map_err(err)
}

fn config(config_json: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_json(config_json).map_err(err)
}

/// Click stream of scan point `index` as `(timestamp, channel)` tuples.
#[pyfunction]
#[pyo3(signature = (config_json, index = 0))]
fn simulate_point(py: Python<'_>, config_json: &str, index: usize) -> PyResult<Vec<(u64, u8)>> {
    let cfg = config(config_json)?;
    let sim = py.detach(|| ex::simulate_point(&cfg, index)).map_err(err)?;
    Ok(tuples(&sim.stream))
}

/// Runs the scan described by a JSON config and returns the result dict.
#[pyfunction]
fn run_scan<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(config_json)?;
    let result = py.detach(|| ex::run_experiment(&cfg)).map_err(err)?;
    to_py(py, &result)
}

/// Scan table CSV of a result dict as returned by `run_scan`.
#[pyfunction]
fn scan_csv(py: Python<'_>, result: Bound<'_, PyAny>) -> PyResult<String> {
    let text: String = py.import("json")?.call_method1("dumps", (result,))?.extract()?;
    let result: ex::ExperimentResult =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(ex::scan_csv(&result))
}

#[pymodule]
fn hvpair_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HvpairError", m.py().get_type::<HvpairError>())?;
    m.add_class::<PyCalibration>()?;
    m.add_class::<PyCounter>()?;
    m.add_function(wrap_pyfunction!(singlet_rates, m)?)?;
    m.add_function(wrap_pyfunction!(sum_angle_rates, m)?)?;
    m.add_function(wrap_pyfunction!(correlation, m)?)?;
    m.add_function(wrap_pyfunction!(chsh_from_visibility, m)?)?;
    m.add_function(wrap_pyfunction!(doubles_rate, m)?)?;
    m.add_function(wrap_pyfunction!(count_coincidences, m)?)?;
    m.add_function(wrap_pyfunction!(read_ttag, m)?)?;
    m.add_function(wrap_pyfunction!(write_ttag, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_point, m)?)?;
    m.add_function(wrap_pyfunction!(run_scan, m)?)?;
    m.add_function(wrap_pyfunction!(scan_csv, m)?)?;
    Ok(())
}
