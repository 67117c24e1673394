//! Python bindings. Complex vectors cross the boundary as lists of Python
//! `complex`; matrices as lists of rows.

use blindofdm::channel::{self, ChannelMode, NoiseSpec, Pdp};
use blindofdm::constellation::{phase_pattern, SourceStats};
use blindofdm::estimator::{self, EstimatorConfig, NoiseMode};
use blindofdm::numerics;
use blindofdm::sim::{self, config as simcfg, Execution};
use blindofdm::{Complex64, Error, HermitianMatrix};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_)
        | Error::Dimension { .. }
        | Error::InvalidOrder(_)
        | Error::BitLength { .. }
        | Error::InvalidFrame(_)
        | Error::InvalidWeight(_)
        | Error::PilotIndex { .. }
        | Error::InvalidPilot => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

type Matrix = Vec<Vec<Complex64>>;

fn rows(a: &HermitianMatrix) -> Matrix {
    (0..a.dim()).map(|i| a.row(i).to_vec()).collect()
}

fn from_rows(rows: Matrix) -> PyResult<HermitianMatrix> {
    let dim = rows.len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    HermitianMatrix::from_row_major(dim, rows.concat()).map_err(to_py)
}

#[pyclass(name = "SplitConstellation", frozen)]
struct PySplitConstellation(blindofdm::SplitConstellation);

#[pymethods]
impl PySplitConstellation {
    #[new]
    fn new(order: u32) -> PyResult<Self> {
        blindofdm::SplitConstellation::new(order)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn order(&self) -> u32 {
        self.0.order()
    }

    #[getter]
    fn sigma_d2(&self) -> f64 {
        self.0.sigma_d2()
    }

    #[getter]
    fn bits_per_symbol(&self) -> usize {
        self.0.bits_per_symbol()
    }

    #[getter]
    fn right_subset(&self) -> Vec<f64> {
        self.0.right_subset().to_vec()
    }

    #[getter]
    fn left_subset(&self) -> Vec<f64> {
        self.0.left_subset().to_vec()
    }

    fn map_bits(&self, bits: Vec<bool>, m: usize) -> PyResult<Vec<Complex64>> {
        self.0.map_bits(&bits, m).map_err(to_py)
    }

    fn demap(&self, d_hat: Vec<Complex64>) -> Vec<bool> {
        self.0.demap(&d_hat)
    }

    fn decide(&self, d_hat: Vec<Complex64>) -> Vec<usize> {
        self.0.decide(&d_hat)
    }

    fn random_frame(&self, m: usize, seed: u64) -> PyResult<Vec<Complex64>> {
        self.0
            .random_frame(m, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("SplitConstellation({})", self.0.order())
    }
}

#[pyclass(name = "Precoder", frozen)]
struct PyPrecoder(blindofdm::Precoder);

#[pymethods]
impl PyPrecoder {
    #[new]
    fn new(m: usize, p: f64) -> PyResult<Self> {
        blindofdm::Precoder::new(m, p).map(Self).map_err(to_py)
    }

    #[getter]
    fn subcarriers(&self) -> usize {
        self.0.subcarriers()
    }

    #[getter]
    fn weight(&self) -> f64 {
        self.0.weight()
    }

    fn matrix(&self) -> Matrix {
        rows(self.0.matrix())
    }

    fn gram(&self) -> Matrix {
        rows(self.0.gram())
    }

    fn apply(&self, d: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.apply(&d).map_err(to_py)
    }

    fn invert_apply(&self, s: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        self.0.invert_apply(&s).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Precoder(m={}, p={})",
            self.0.subcarriers(),
            self.0.weight()
        )
    }
}

/// Simulation configuration. Keyword arguments use the same names as the
/// command-line flags, with underscores.
#[pyclass(name = "SimConfig", skip_from_py_object)]
#[derive(Clone)]
struct PySimConfig(sim::SimConfig);

fn set_from_py(cfg: &mut sim::SimConfig, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
    let text = if let Ok(items) = value.extract::<Vec<Bound<'_, PyAny>>>() {
        items
            .iter()
            .map(|v| v.str().map(|s| s.to_string()))
            .collect::<PyResult<Vec<_>>>()?
            .join(",")
    } else if value.is_none() {
        "none".to_string()
    } else {
        value.str()?.to_string()
    };
    cfg.set(key, &text).map_err(to_py)
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut cfg = sim::SimConfig::default();
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                set_from_py(&mut cfg, &k.extract::<String>()?, &v)?;
            }
        }
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    /// Parses `key=value` text with `#` comments.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        sim::SimConfig::from_kv_text(text).map(Self).map_err(to_py)
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        set_from_py(&mut self.0, key, value)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| to_py(e.into()))
    }

    #[getter]
    fn subcarriers(&self) -> usize {
        self.0.subcarriers
    }

    #[getter]
    fn snr_db(&self) -> Vec<f64> {
        self.0.snr_db.clone()
    }

    #[getter]
    fn blocks(&self) -> Vec<usize> {
        self.0.blocks.clone()
    }

    #[getter]
    fn runs(&self) -> usize {
        self.0.runs
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.0.mode.label()
    }

    fn __repr__(&self) -> String {
        format!("SimConfig({:?})", self.0)
    }
}

#[pyclass(name = "RunResult", frozen, get_all)]
struct PyRunResult {
    run: usize,
    snr_db: f64,
    n_blocks: usize,
    mode: &'static str,
    pdp: &'static str,
    nmse: f64,
    phase_error: f64,
    ser: f64,
    elapsed_s: f64,
}

impl From<&sim::RunResult> for PyRunResult {
    fn from(r: &sim::RunResult) -> Self {
        Self {
            run: r.run,
            snr_db: r.snr_db,
            n_blocks: r.n_blocks,
            mode: r.mode.label(),
            pdp: r.pdp.label(),
            nmse: r.nmse,
            phase_error: r.phase_error,
            ser: r.ser,
            elapsed_s: r.elapsed_s,
        }
    }
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!(
            "RunResult(run={}, snr_db={}, n_blocks={}, mode={}, nmse={:e})",
            self.run, self.snr_db, self.n_blocks, self.mode, self.nmse
        )
    }
}

fn results_to_py(rows: &[sim::RunResult]) -> Vec<PyRunResult> {
    rows.iter().map(PyRunResult::from).collect()
}

fn run_rows(py: Python<'_>, cfg: &PySimConfig, threads: usize) -> PyResult<Vec<sim::RunResult>> {
    let cfg = cfg.0.clone();
    let exec = match threads {
        1 => Execution::Serial,
        0 => Execution::Parallel(None),
        n => Execution::Parallel(Some(n)),
    };
    py.detach(|| sim::sweep(&cfg, exec)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (config, threads = 0))]
fn sweep(py: Python<'_>, config: &PySimConfig, threads: usize) -> PyResult<Vec<PyRunResult>> {
    Ok(results_to_py(&run_rows(py, config, threads)?))
}

/// Sweep rendered straight to CSV text.
#[pyfunction]
#[pyo3(signature = (config, threads = 0))]
fn sweep_csv(py: Python<'_>, config: &PySimConfig, threads: usize) -> PyResult<String> {
    Ok(sim::to_csv(&run_rows(py, config, threads)?))
}

/// One run at the first SNR and block count; returns a dict holding the
/// metrics, both phases and the corrected and true responses.
#[pyfunction]
#[pyo3(signature = (config, run = 0))]
fn run_single<'py>(
    py: Python<'py>,
    config: &PySimConfig,
    run: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.0.clone();
    let out = py
        .detach(|| sim::run_point(&cfg, cfg.snr_db[0], cfg.blocks[0], run))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("result", PyRunResult::from(&out.result))?;
    d.set_item("h_est", out.estimate.h_est)?;
    d.set_item("h_estimate", out.estimate.h_estimate)?;
    d.set_item("phi_est", out.estimate.phi_est)?;
    d.set_item("phi_true", out.phi_true)?;
    d.set_item("truth", out.truth)?;
    d.set_item("sigma_n2", out.sigma_n2)?;
    Ok(d)
}

#[pyfunction]
fn dft(x: Vec<Complex64>, m: usize) -> PyResult<Vec<Complex64>> {
    numerics::dft(&x, m).map_err(to_py)
}

#[pyfunction]
fn idft(x: Vec<Complex64>) -> Vec<Complex64> {
    numerics::idft(&x)
}

#[pyfunction]
fn wrap_angle(theta: f64) -> f64 {
    numerics::wrap_angle(theta)
}

#[pyfunction]
#[pyo3(signature = (angles, weights = None))]
fn circular_mean(angles: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<f64> {
    let weights = weights.unwrap_or_else(|| vec![1.0; angles.len()]);
    numerics::circular_mean(&angles, &weights).map_err(to_py)
}

/// Dominant eigenvalue and eigenvector of a Hermitian matrix.
#[pyfunction]
fn dominant_eigpair(a: Matrix) -> PyResult<(f64, Vec<Complex64>)> {
    numerics::dominant_eigpair(&from_rows(a)?).map_err(to_py)
}

/// Draws a channel; returns `(taps, frequency_response)`.
#[pyfunction]
#[pyo3(signature = (m, order = 2, pdp = "exp", rayleigh = false, normalize = true, seed = 0))]
fn sample_channel(
    m: usize,
    order: usize,
    pdp: &str,
    rayleigh: bool,
    normalize: bool,
    seed: u64,
) -> PyResult<(Vec<Complex64>, Vec<Complex64>)> {
    let kind = simcfg::parse_pdp(pdp).map_err(to_py)?;
    let mode = if rayleigh {
        ChannelMode::Rayleigh
    } else {
        ChannelMode::FixedMagnitude
    };
    let ch = channel::sample_channel(
        &Pdp::new(kind, order),
        mode,
        normalize,
        m,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )
    .map_err(to_py)?;
    Ok((ch.taps, ch.response))
}

#[pyfunction]
fn freq_response(taps: Vec<Complex64>, m: usize) -> PyResult<Vec<Complex64>> {
    channel::freq_response(&taps, m).map_err(to_py)
}

/// `sigma_d2 (H H^H) . P + sigma_n2 I` for the precoder's gram matrix.
#[pyfunction]
#[pyo3(signature = (response, precoder, sigma_d2, sigma_n2 = 0.0))]
fn analytic_covariance(
    response: Vec<Complex64>,
    precoder: &PyPrecoder,
    sigma_d2: f64,
    sigma_n2: f64,
) -> PyResult<Matrix> {
    estimator::analytic_covariance(&response, precoder.0.gram(), sigma_d2, sigma_n2)
        .map(|r| rows(&r))
        .map_err(to_py)
}

fn estimator_config(
    precoder: &PyPrecoder,
    sigma_d2: f64,
    pam_order: Option<u32>,
    sigma_n2: Option<f64>,
    denoise_taps: Option<usize>,
) -> PyResult<EstimatorConfig> {
    let noise = sigma_n2.map_or(NoiseMode::Estimated, NoiseMode::Known);
    let cfg = match pam_order {
        Some(q) => {
            let con = blindofdm::SplitConstellation::new(q).map_err(to_py)?;
            EstimatorConfig::new(&precoder.0, &SourceStats::from(&con), noise)
        }
        None => EstimatorConfig::with_gram(sigma_d2, precoder.0.gram().clone(), noise),
    }
    .map_err(to_py)?;
    Ok(cfg.with_denoise_taps(denoise_taps))
}

/// Channel up to a global phase from a covariance matrix.
///
/// With `pam_order` the model accounts for the split constellation's
/// subcarrier means; without it the source is taken as white with energy
/// `sigma_d2`. `sigma_n2=None` estimates the noise floor.
#[pyfunction]
#[pyo3(signature = (covariance, precoder, sigma_d2 = 21.0, pam_order = None, sigma_n2 = None, denoise_taps = None))]
fn joint_estimate(
    covariance: Matrix,
    precoder: &PyPrecoder,
    sigma_d2: f64,
    pam_order: Option<u32>,
    sigma_n2: Option<f64>,
    denoise_taps: Option<usize>,
) -> PyResult<Vec<Complex64>> {
    let cfg = estimator_config(precoder, sigma_d2, pam_order, sigma_n2, denoise_taps)?;
    estimator::joint_estimate(&from_rows(covariance)?, &cfg).map_err(to_py)
}

/// Blind phase ambiguity from received frames; returns `phi`.
#[pyfunction]
fn estimate_phase_ambiguity(h_est: Vec<Complex64>, frames: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let pattern = phase_pattern(h_est.len()).map_err(to_py)?;
    estimator::estimate_phase_ambiguity(&h_est, &frames, &pattern)
        .map(|p| p.phi)
        .map_err(to_py)
}

#[pyfunction]
fn correct_phase(h_est: Vec<Complex64>, phi: f64) -> Vec<Complex64> {
    estimator::correct_phase(&h_est, phi)
}

/// Full blind pipeline on received frames; returns `(h_estimate, phi_est)`.
#[pyfunction]
#[pyo3(signature = (frames, precoder, pam_order = 8, sigma_n2 = None, denoise_taps = None))]
fn blind_estimate(
    frames: Vec<Vec<Complex64>>,
    precoder: &PyPrecoder,
    pam_order: u32,
    sigma_n2: Option<f64>,
    denoise_taps: Option<usize>,
) -> PyResult<(Vec<Complex64>, f64)> {
    let cfg = estimator_config(precoder, 0.0, Some(pam_order), sigma_n2, denoise_taps)?;
    let pattern = phase_pattern(precoder.0.subcarriers()).map_err(to_py)?;
    estimator::blind_estimate(&frames, &cfg, &pattern)
        .map(|e| (e.h_estimate, e.phi_est))
        .map_err(to_py)
}

/// Received frames `y = H . (W d) + n` for random split-PAM data.
#[pyfunction]
#[pyo3(signature = (response, precoder, n_frames, pam_order = 8, sigma_n2 = 0.0, seed = 0))]
fn simulate_frames(
    response: Vec<Complex64>,
    precoder: &PyPrecoder,
    n_frames: usize,
    pam_order: u32,
    sigma_n2: f64,
    seed: u64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let con = blindofdm::SplitConstellation::new(pam_order).map_err(to_py)?;
    let noise = NoiseSpec::new(sigma_n2).map_err(to_py)?;
    let m = precoder.0.subcarriers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_frames)
        .map(|_| {
            let s = precoder.0.apply(&con.random_frame(m, &mut rng)?)?;
            blindofdm::ofdm::rx_freq_model(&s, &response, noise, &mut rng)
        })
        .collect::<Result<_, _>>()
        .map_err(to_py)
}

#[pyfunction]
fn nmse(h_hat: Vec<Complex64>, h: Vec<Complex64>) -> PyResult<f64> {
    sim::nmse(&h_hat, &h).map_err(to_py)
}

#[pyfunction]
fn selftest(seed: u64) -> PyResult<Vec<(String, bool, f64)>> {
    Ok(sim::run_selftest(seed)
        .map_err(to_py)?
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.worst))
        .collect())
}

#[pymodule]
fn blindofdm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySplitConstellation>()?;
    m.add_class::<PyPrecoder>()?;
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyRunResult>()?;
    m.add("CSV_HEADER", sim::CSV_HEADER)?;
    m.add_function(wrap_pyfunction!(dft, m)?)?;
    m.add_function(wrap_pyfunction!(idft, m)?)?;
    m.add_function(wrap_pyfunction!(wrap_angle, m)?)?;
    m.add_function(wrap_pyfunction!(circular_mean, m)?)?;
    m.add_function(wrap_pyfunction!(dominant_eigpair, m)?)?;
    m.add_function(wrap_pyfunction!(sample_channel, m)?)?;
    m.add_function(wrap_pyfunction!(freq_response, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(joint_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_phase_ambiguity, m)?)?;
    m.add_function(wrap_pyfunction!(correct_phase, m)?)?;
    m.add_function(wrap_pyfunction!(blind_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_frames, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(run_single, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_csv, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
