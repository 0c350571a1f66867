//! Python bindings: model functions, the detected-signal integrator, the fits,
//! the Zeeman calculator, the hole-scan pipeline and the synthetic generators.

use holeburn::fit::{self, DecayCurve, FitParam, TrapFitConfig};
use holeburn::integrate::{
    self, GaussianFocus, IntegrationDomain, ScaledSignalParams, SpectralSampling,
};
use holeburn::model::{self, MaterialParams};
use holeburn::synth::{self, HoleScanSpec, NoiseKind, NoiseSpec};
use holeburn::trace::{self, EdgeMode, RawScan};
use holeburn::zeeman::{self, ZeemanConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(holeburn_py, ConvergenceError, PyRuntimeError);
create_exception!(holeburn_py, FitError, PyRuntimeError);

fn to_py(e: holeburn::Error) -> PyErr {
    use holeburn::Error::*;
    match e {
        InvalidParameter(_) | InvalidData(_) | Csv(_) => PyValueError::new_err(e.to_string()),
        NotConverged { .. } => ConvergenceError::new_err(e.to_string()),
        FitFailed(_) => FitError::new_err(e.to_string()),
        Io(_) => PyIOError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for holeburn::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn param<'py>(py: Python<'py>, p: &FitParam) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", p.value)?;
    d.set_item("uncertainty", p.uncertainty)?;
    Ok(d)
}

fn noise(kind: &str, seed: u64, sigma: f64) -> PyResult<NoiseSpec> {
    let kind = match kind {
        "none" => NoiseKind::None,
        "poisson" => NoiseKind::Poisson,
        "gaussian" => NoiseKind::Gaussian,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown noise kind `{other}`"
            )))
        }
    };
    Ok(NoiseSpec {
        kind,
        seed,
        gaussian_sigma: sigma,
    })
}

fn domain(n_r: usize, n_z: usize, n_delta: usize, resonant: bool) -> IntegrationDomain {
    IntegrationDomain {
        n_r,
        n_z,
        n_delta,
        spectral: if resonant {
            SpectralSampling::Resonant
        } else {
            SpectralSampling::Integrated
        },
        ..Default::default()
    }
}

/// Material, focus and rates of the four-level trapping model.
#[pyclass(name = "TrapModel", module = "holeburn_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTrapModel {
    inner: model::TrapModel,
}

#[pymethods]
impl PyTrapModel {
    /// Model with the spontaneous recombination rate computed from the cross
    /// section. Unset keywords take the default material values.
    #[new]
    #[pyo3(signature = (focus_fwhm = 1e-6, **kwargs))]
    fn new(focus_fwhm: f64, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut m = MaterialParams::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let v: f64 = v.extract()?;
                let slot = match key.as_str() {
                    "sat_intensity" => &mut m.sat_intensity,
                    "sigma_ion" => &mut m.sigma_ion,
                    "sigma_rec" => &mut m.sigma_rec,
                    "photoioniz_fwhm" => &mut m.photoioniz_fwhm,
                    "vac_wavelength" => &mut m.vac_wavelength,
                    "refr_index" => &mut m.refr_index,
                    "hom_linewidth0" => &mut m.hom_linewidth0,
                    "ion_density" => &mut m.ion_density,
                    "fluor_rate" => &mut m.fluor_rate,
                    "g_ratio" => &mut m.g_ratio,
                    "coll0" => &mut m.coll0,
                    _ => {
                        return Err(PyValueError::new_err(format!(
                            "unknown material parameter `{key}`"
                        )))
                    }
                };
                *slot = v;
            }
        }
        Ok(Self {
            inner: model::TrapModel::new(m, focus_fwhm).py_err()?,
        })
    }

    /// Default material pinned to the tabulated ionization and spontaneous
    /// recombination rates.
    #[staticmethod]
    fn tabulated() -> Self {
        Self {
            inner: model::TrapModel::tabulated(),
        }
    }

    #[getter]
    fn gamma_rec_spon(&self) -> f64 {
        self.inner.gamma_rec_spon
    }

    #[setter]
    fn set_gamma_rec_spon(&mut self, v: f64) -> PyResult<()> {
        let mut m = self.inner;
        m.gamma_rec_spon = v;
        m.validate().py_err()?;
        self.inner = m;
        Ok(())
    }

    #[getter]
    fn sigma_ion(&self) -> f64 {
        self.inner.material.sigma_ion
    }

    #[getter]
    fn focus_fwhm(&self) -> f64 {
        self.inner.focus_fwhm
    }

    /// Rescale σ_ion so Γ_ion equals `gamma_ion` at the peak of a beam of `power`.
    fn calibrate_ionization(&mut self, gamma_ion: f64, power: f64) -> PyResult<()> {
        self.inner.calibrate_ionization(gamma_ion, power).py_err()
    }

    /// Peak intensity, waist and Rayleigh length of the focused beam.
    fn beam<'py>(&self, py: Python<'py>, power: f64) -> PyResult<Bound<'py, PyDict>> {
        let b = self.inner.beam(power).py_err()?;
        let d = PyDict::new(py);
        d.set_item("peak_intensity", b.peak_intensity())?;
        d.set_item("waist", b.waist())?;
        d.set_item("rayleigh", b.rayleigh())?;
        Ok(d)
    }

    /// Steady-state ratios for ions detuned by `delta` at local `intensity`.
    fn local_response<'py>(
        &self,
        py: Python<'py>,
        intensity: f64,
        delta: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.local_response(intensity, delta);
        let d = PyDict::new(py);
        d.set_item("r1", r.r1)?;
        d.set_item("r2", r.r2)?;
        d.set_item("k", r.k)?;
        d.set_item("excited_fraction", r.excited_fraction)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "TrapModel(focus_fwhm={:e}, sigma_ion={:e}, gamma_rec_spon={:e})",
            self.inner.focus_fwhm, self.inner.material.sigma_ion, self.inner.gamma_rec_spon
        )
    }
}

fn model_or_table(model: Option<PyRef<'_, PyTrapModel>>) -> model::TrapModel {
    model.map_or_else(model::TrapModel::tabulated, |m| m.inner)
}

#[pyfunction]
#[pyo3(signature = (r, z, power, focus_fwhm = 1e-6, vac_wavelength = 371e-9, refr_index = 1.8))]
fn beam_intensity(
    r: f64,
    z: f64,
    power: f64,
    focus_fwhm: f64,
    vac_wavelength: f64,
    refr_index: f64,
) -> PyResult<f64> {
    let g = model::BeamGeometry::new(power, focus_fwhm, vac_wavelength, refr_index).py_err()?;
    Ok(model::beam_intensity(r, z, &g))
}

#[pyfunction]
fn ionization_rate(intensity: f64, sigma_ion: f64, wavelength: f64) -> f64 {
    model::ionization_rate(intensity, sigma_ion, wavelength)
}

#[pyfunction]
#[pyo3(signature = (sigma_rec, delta_f, wavelength, g_ratio = 1.0))]
fn spont_recombination_rate(sigma_rec: f64, delta_f: f64, wavelength: f64, g_ratio: f64) -> f64 {
    model::spont_recombination_rate(sigma_rec, delta_f, wavelength, g_ratio)
}

/// R1 = 1 + 2 I_sat / I, or None where the light does not reach.
#[pyfunction]
fn saturation_ratio(intensity: f64, sat_intensity: f64) -> Option<f64> {
    model::saturation_ratio(intensity, sat_intensity)
}

#[pyfunction]
fn steady_state_fraction(r1: f64, r2: f64) -> f64 {
    model::steady_state_fractions(r1, r2)
}

#[pyfunction]
fn trapped_fraction(t: f64, gamma_trap: f64, k: f64) -> f64 {
    model::trapped_fraction(t, gamma_trap, k)
}

/// Model signal S(t) in photons/s for a focused beam of `power`.
#[pyfunction]
#[pyo3(signature = (times, power, gamma_trap = 7e4, model = None, n_r = 64, n_z = 64, n_delta = 128, resonant = false))]
#[allow(clippy::too_many_arguments)]
fn simulate_signal(
    py: Python<'_>,
    times: Vec<f64>,
    power: f64,
    gamma_trap: f64,
    model: Option<PyRef<'_, PyTrapModel>>,
    n_r: usize,
    n_z: usize,
    n_delta: usize,
    resonant: bool,
) -> PyResult<Vec<f64>> {
    let m = model_or_table(model);
    let dom = domain(n_r, n_z, n_delta, resonant);
    py.detach(|| {
        let prof = GaussianFocus::new(&m, power)?;
        integrate::detected_signal(&times, &m, &prof, gamma_trap, &dom).map(|t| t.model_signal)
    })
    .py_err()
}

/// A·S + B·P.
#[pyfunction]
fn scaled_signal(
    model_signal: Vec<f64>,
    scale_a: f64,
    background_b: f64,
    power: f64,
) -> PyResult<Vec<f64>> {
    let p = ScaledSignalParams {
        scale_a,
        background_b,
        power,
    };
    p.validate().py_err()?;
    Ok(integrate::scaled_signal(&model_signal, &p))
}

/// Global fit of the trap rate to `[(times, counts_per_s, power_w), ...]`.
#[pyfunction]
#[pyo3(signature = (curves, model = None, n_r = 64, n_z = 64, n_delta = 128, gamma_seed = 1e5))]
fn fit_trap<'py>(
    py: Python<'py>,
    curves: Vec<(Vec<f64>, Vec<f64>, f64)>,
    model: Option<PyRef<'py, PyTrapModel>>,
    n_r: usize,
    n_z: usize,
    n_delta: usize,
    gamma_seed: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let curves: Vec<DecayCurve> = curves
        .into_iter()
        .map(|(time_s, counts_per_s, power_w)| DecayCurve {
            time_s,
            counts_per_s,
            power_w,
        })
        .collect();
    let cfg = TrapFitConfig {
        model: model_or_table(model),
        domain: domain(n_r, n_z, n_delta, false),
        gamma_seed,
        ..Default::default()
    };
    let r = py.detach(|| fit::fit_trap_model(&curves, &cfg)).py_err()?;
    let d = PyDict::new(py);
    d.set_item("gamma_trap", param(py, &r.gamma_trap)?)?;
    d.set_item("background_b", param(py, &r.background_b)?)?;
    let scales = r
        .scale_a
        .iter()
        .map(|p| param(py, p))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("scale_a", scales)?;
    d.set_item("residual", r.residual)?;
    d.set_item("converged", r.converged)?;
    d.set_item("iterations", r.iterations)?;
    Ok(d)
}

/// Constant-minus-Lorentzian fit; `sigma` gives per-point errors.
#[pyfunction]
#[pyo3(signature = (freq, signal, sigma = None))]
fn fit_hole<'py>(
    py: Python<'py>,
    freq: Vec<f64>,
    signal: Vec<f64>,
    sigma: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = fit::fit_hole_lorentzian(&freq, &signal, sigma.as_deref()).py_err()?;
    let d = PyDict::new(py);
    d.set_item("baseline", param(py, &r.baseline)?)?;
    d.set_item("depth", param(py, &r.depth)?)?;
    d.set_item("center", param(py, &r.center)?)?;
    d.set_item("fwhm", param(py, &r.fwhm)?)?;
    d.set_item("hom_linewidth", fit::hom_linewidth_from_hole(r.fwhm.value))?;
    d.set_item("residual", r.residual)?;
    d.set_item("hole_detected", r.hole_detected)?;
    Ok(d)
}

#[pyfunction]
fn hom_linewidth_from_hole(fwhm: f64) -> f64 {
    fit::hom_linewidth_from_hole(fwhm)
}

#[pyfunction]
#[pyo3(signature = (times, values, with_offset = true))]
fn fit_exponential<'py>(
    py: Python<'py>,
    times: Vec<f64>,
    values: Vec<f64>,
    with_offset: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let r = fit::fit_exponential(&times, &values, with_offset).py_err()?;
    let d = PyDict::new(py);
    d.set_item("amplitude", param(py, &r.amplitude)?)?;
    d.set_item("tau", param(py, &r.tau)?)?;
    d.set_item(
        "offset",
        r.offset.as_ref().map(|p| param(py, p)).transpose()?,
    )?;
    d.set_item("residual", r.residual)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (x, y, confidence = 0.8))]
fn fit_linear<'py>(
    py: Python<'py>,
    x: Vec<f64>,
    y: Vec<f64>,
    confidence: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = fit::fit_linear_ci(&x, &y, confidence).py_err()?;
    let d = PyDict::new(py);
    d.set_item("slope", r.slope)?;
    d.set_item("intercept", r.intercept)?;
    d.set_item("slope_stderr", r.slope_stderr)?;
    d.set_item("intercept_stderr", r.intercept_stderr)?;
    d.set_item("slope_ci", r.slope_ci)?;
    d.set_item("intercept_ci", r.intercept_ci)?;
    d.set_item("confidence", r.confidence)?;
    Ok(d)
}

fn zeeman_config(
    g_ground: f64,
    g_excited: f64,
    stray_field: f64,
    field_sign: f64,
) -> PyResult<ZeemanConfig> {
    let cfg = ZeemanConfig {
        g_ground,
        g_excited,
        stray_field,
        field_sign,
    };
    cfg.validate().py_err()?;
    Ok(cfg)
}

/// Ground and excited Zeeman splittings (Hz) at total field `b`.
#[pyfunction]
#[pyo3(signature = (b, g_ground = 19e9, g_excited = 25.5e9))]
fn splittings(b: f64, g_ground: f64, g_excited: f64) -> PyResult<(f64, f64)> {
    Ok(zeeman::splittings(
        b,
        &zeeman_config(g_ground, g_excited, 0.0, 1.0)?,
    ))
}

/// Resonance fields (total and applied) for a laser separation `delta_f`.
#[pyfunction]
#[pyo3(signature = (delta_f, g_ground = 19e9, g_excited = 25.5e9, stray_field = 0.2e-3, field_sign = 1.0))]
fn resonance_fields<'py>(
    py: Python<'py>,
    delta_f: f64,
    g_ground: f64,
    g_excited: f64,
    stray_field: f64,
    field_sign: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = zeeman::resonance_fields(
        delta_f,
        &zeeman_config(g_ground, g_excited, stray_field, field_sign)?,
    )
    .py_err()?;
    let d = PyDict::new(py);
    d.set_item("ground", (r.ground.total, r.ground.applied))?;
    d.set_item("sum", (r.sum.total, r.sum.applied))?;
    d.set_item("diff", r.diff.map(|p| (p.total, p.applied)))?;
    Ok(d)
}

/// Background subtraction and power normalization. Excluded points carry NaN.
#[pyfunction]
fn treat_scan<'py>(
    py: Python<'py>,
    freq: Vec<f64>,
    fluor_counts: Vec<f64>,
    power_counts: Vec<f64>,
    aom_off: (usize, usize),
) -> PyResult<Bound<'py, PyDict>> {
    let raw = RawScan {
        freq,
        fluor_counts,
        power_monitor: power_counts,
        aom_off_range: aom_off.0..aom_off.1,
    };
    let clean = trace::subtract_background(&raw).py_err()?;
    let norm = trace::normalize_by_power(&clean).py_err()?;
    let d = PyDict::new(py);
    d.set_item("freq", norm.freq)?;
    d.set_item("signal", norm.signal)?;
    d.set_item("excluded", norm.excluded)?;
    d.set_item("fluor_counts", clean.fluor_counts)?;
    d.set_item("power_counts", clean.power_monitor)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (data, window, periodic = false))]
fn moving_average(data: Vec<f64>, window: usize, periodic: bool) -> PyResult<Vec<f64>> {
    let edges = if periodic {
        EdgeMode::Periodic
    } else {
        EdgeMode::Truncate
    };
    trace::moving_average(&data, window, edges).py_err()
}

/// Σ(baseline − signal) over finite points and σ_point·√n.
#[pyfunction]
fn hole_area(signal: Vec<f64>, baseline: f64, sigma_point: f64) -> PyResult<(f64, f64)> {
    let n = signal.len();
    let excluded = (0..n).filter(|&i| !signal[i].is_finite()).collect();
    let scan = trace::NormalizedScan {
        freq: (0..n).map(|i| i as f64).collect(),
        signal,
        excluded,
        sigma_point: None,
    };
    let a = trace::hole_area_with_error(&scan, baseline, sigma_point).py_err()?;
    Ok((a.area, a.sigma_area))
}

/// Synthetic raw hole scan as a dict of `freq`, `fluor_counts`, `power_counts`.
#[pyfunction]
#[pyo3(signature = (seed = 0, noise_kind = "poisson", depth = 0.4, center = -50e6, fwhm = 6e6, n_points = 5000, gaussian_sigma = 0.0))]
#[allow(clippy::too_many_arguments)]
fn gen_hole_scan<'py>(
    py: Python<'py>,
    seed: u64,
    noise_kind: &str,
    depth: f64,
    center: f64,
    fwhm: f64,
    n_points: usize,
    gaussian_sigma: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = HoleScanSpec {
        depth,
        center,
        fwhm,
        n_points,
        ..Default::default()
    };
    let raw = synth::gen_hole_scan(&spec, &noise(noise_kind, seed, gaussian_sigma)?, 0).py_err()?;
    let d = PyDict::new(py);
    d.set_item("freq", raw.freq)?;
    d.set_item("fluor_counts", raw.fluor_counts)?;
    d.set_item("power_counts", raw.power_monitor)?;
    d.set_item("aom_off", (raw.aom_off_range.start, raw.aom_off_range.end))?;
    Ok(d)
}

/// Synthetic decay curve `A·S(t) + B·P` with optional Poisson counting noise.
#[pyfunction]
#[pyo3(signature = (times, power, gamma_trap = 7e4, scale_a = 0.19, background_b = 9.4e7, seed = 0, noise_kind = "poisson", bin_width_s = 1.0, stream = 0, model = None, n_r = 64, n_z = 64, n_delta = 128))]
#[allow(clippy::too_many_arguments)]
fn gen_decay_curve(
    py: Python<'_>,
    times: Vec<f64>,
    power: f64,
    gamma_trap: f64,
    scale_a: f64,
    background_b: f64,
    seed: u64,
    noise_kind: &str,
    bin_width_s: f64,
    stream: u64,
    model: Option<PyRef<'_, PyTrapModel>>,
    n_r: usize,
    n_z: usize,
    n_delta: usize,
) -> PyResult<Vec<f64>> {
    let m = model_or_table(model);
    let dom = domain(n_r, n_z, n_delta, false);
    let spec = noise(noise_kind, seed, 0.0)?;
    let req = synth::DecayRequest {
        model: &m,
        domain: &dom,
        gamma_trap,
        scale: ScaledSignalParams {
            scale_a,
            background_b,
            power,
        },
        times: &times,
        bin_width_s,
    };
    py.detach(|| synth::gen_decay_curve(&req, &spec, stream))
        .map(|g| g.curve.counts_per_s)
        .py_err()
}

#[pymodule]
fn holeburn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("ConvergenceError", py.get_type::<ConvergenceError>())?;
    m.add("FitError", py.get_type::<FitError>())?;
    m.add("SERIES_POWERS_W", synth::SERIES_POWERS_W.to_vec())?;
    m.add_class::<PyTrapModel>()?;
    m.add_function(wrap_pyfunction!(beam_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(ionization_rate, m)?)?;
    m.add_function(wrap_pyfunction!(spont_recombination_rate, m)?)?;
    m.add_function(wrap_pyfunction!(saturation_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(steady_state_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(trapped_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_signal, m)?)?;
    m.add_function(wrap_pyfunction!(scaled_signal, m)?)?;
    m.add_function(wrap_pyfunction!(fit_trap, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hole, m)?)?;
    m.add_function(wrap_pyfunction!(hom_linewidth_from_hole, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponential, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear, m)?)?;
    m.add_function(wrap_pyfunction!(splittings, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_fields, m)?)?;
    m.add_function(wrap_pyfunction!(treat_scan, m)?)?;
    m.add_function(wrap_pyfunction!(moving_average, m)?)?;
    m.add_function(wrap_pyfunction!(hole_area, m)?)?;
    m.add_function(wrap_pyfunction!(gen_hole_scan, m)?)?;
    m.add_function(wrap_pyfunction!(gen_decay_curve, m)?)?;
    Ok(())
}
