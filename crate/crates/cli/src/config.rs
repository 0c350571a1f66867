//! Sectioned TOML run configuration. Every physical key carries its SI unit
//! as a suffix; unknown keys are rejected.

use std::ops::Range;
use std::path::Path;

use holeburn::fit::TrapFitConfig;
use holeburn::integrate::{IntegrationDomain, ScaledSignalParams, SpectralSampling};
use holeburn::model::{
    MaterialParams, TrapModel, TABLE_GAMMA_ION, TABLE_GAMMA_REC_SPON, TABLE_ION_REFERENCE_POWER,
};
use holeburn::simplex::SimplexOptions;
use holeburn::synth::{HoleScanSpec, NoiseKind, NoiseSpec, SERIES_POWERS_W};
use holeburn::zeeman::ZeemanConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub material: MaterialSection,
    pub beam: BeamSection,
    pub integration: IntegrationSection,
    pub fit: FitSection,
    pub zeeman: ZeemanSection,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Ionization and spontaneous recombination pinned to tabulated rates.
    Table,
    /// Both rates computed from the cross sections.
    Formula,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSection {
    pub sat_intensity_w_per_m2: f64,
    pub sigma_ion_m2: f64,
    pub sigma_rec_m2: f64,
    pub photoioniz_fwhm_hz: f64,
    pub vac_wavelength_m: f64,
    pub refr_index: f64,
    pub hom_linewidth0_hz: f64,
    pub ion_density_per_m3: f64,
    pub fluor_rate_per_s: f64,
    pub g_ratio: f64,
    pub coll0: f64,
    pub rates: RateSource,
    pub gamma_ion_ref_per_s: f64,
    pub gamma_ion_ref_power_w: f64,
    pub gamma_rec_spon_per_s: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let m = MaterialParams::default();
        Self {
            sat_intensity_w_per_m2: m.sat_intensity,
            sigma_ion_m2: m.sigma_ion,
            sigma_rec_m2: m.sigma_rec,
            photoioniz_fwhm_hz: m.photoioniz_fwhm,
            vac_wavelength_m: m.vac_wavelength,
            refr_index: m.refr_index,
            hom_linewidth0_hz: m.hom_linewidth0,
            ion_density_per_m3: m.ion_density,
            fluor_rate_per_s: m.fluor_rate,
            g_ratio: m.g_ratio,
            coll0: m.coll0,
            rates: RateSource::Table,
            gamma_ion_ref_per_s: TABLE_GAMMA_ION,
            gamma_ion_ref_power_w: TABLE_ION_REFERENCE_POWER,
            gamma_rec_spon_per_s: TABLE_GAMMA_REC_SPON,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    pub power_w: f64,
    pub focus_fwhm_m: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        Self {
            power_w: 20e-6,
            focus_fwhm_m: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegrationSection {
    pub r_max_m: f64,
    pub z_halfwidth_m: f64,
    pub delta_halfwidth_hz: f64,
    pub n_r: usize,
    pub n_z: usize,
    pub n_delta: usize,
    pub spectral: SpectralSampling,
    pub t_end_s: f64,
    pub t_step_s: f64,
    /// Refine the grid until S(t) changes by less than this; absent means a
    /// single evaluation.
    pub rel_tol: Option<f64>,
    pub max_refinements: usize,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        let d = IntegrationDomain::default();
        Self {
            r_max_m: d.r_max,
            z_halfwidth_m: d.z_halfwidth,
            delta_halfwidth_hz: d.delta_halfwidth,
            n_r: d.n_r,
            n_z: d.n_z,
            n_delta: d.n_delta,
            spectral: d.spectral,
            t_end_s: 200.0,
            t_step_s: 1.0,
            rel_tol: None,
            max_refinements: holeburn::integrate::DEFAULT_MAX_REFINEMENTS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub gamma_trap_per_s: f64,
    pub scale_a: f64,
    pub background_b_counts_per_w: f64,
    pub gamma_seed_per_s: f64,
    pub compression_bins: usize,
    pub x_tol: f64,
    pub f_tol: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub confidence: f64,
    pub with_offset: bool,
    /// Normalized level the hole baseline is compared against for the area.
    pub area_baseline: Option<f64>,
}

impl Default for FitSection {
    fn default() -> Self {
        let s = SimplexOptions::default();
        Self {
            gamma_trap_per_s: holeburn::model::TABLE_GAMMA_TRAP,
            scale_a: 0.19,
            background_b_counts_per_w: 9.4e7,
            gamma_seed_per_s: 1e5,
            compression_bins: 4096,
            x_tol: s.x_tol,
            f_tol: s.f_tol,
            max_iterations: s.max_iterations,
            restarts: 1,
            confidence: holeburn::fit::DEFAULT_CONFIDENCE,
            with_offset: true,
            area_baseline: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZeemanSection {
    pub g_ground_hz_per_t: f64,
    pub g_excited_hz_per_t: f64,
    pub stray_field_t: f64,
    pub field_sign: f64,
    pub laser_separations_hz: Vec<f64>,
}

impl Default for ZeemanSection {
    fn default() -> Self {
        let z = ZeemanConfig::default();
        Self {
            g_ground_hz_per_t: z.g_ground,
            g_excited_hz_per_t: z.g_excited,
            stray_field_t: z.stray_field,
            field_sign: z.field_sign,
            laser_separations_hz: vec![19e6, 44.5e6],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub seed: u64,
    pub noise: NoiseKind,
    pub gaussian_sigma: f64,
    pub bin_width_s: f64,
    pub series_powers_w: Vec<f64>,
    pub hole_baseline: f64,
    pub hole_depth: f64,
    pub hole_center_hz: f64,
    pub hole_fwhm_hz: f64,
    pub freq_start_hz: f64,
    pub freq_stop_hz: f64,
    pub n_points: usize,
    pub power_level_counts: f64,
    pub power_slope: f64,
    pub fluor_gain: f64,
    pub offset_fluor_counts: f64,
    pub offset_power_counts: f64,
    pub aom_off_start: usize,
    pub aom_off_end: usize,
    pub decay_amplitude: f64,
    pub decay_tau_s: f64,
    pub decay_offset: f64,
    pub wait_times_s: Vec<f64>,
}

impl Default for SynthSection {
    fn default() -> Self {
        let h = HoleScanSpec::default();
        Self {
            seed: 0,
            noise: NoiseKind::Poisson,
            gaussian_sigma: 0.0,
            bin_width_s: 1.0,
            series_powers_w: SERIES_POWERS_W.to_vec(),
            hole_baseline: h.baseline,
            hole_depth: h.depth,
            hole_center_hz: h.center,
            hole_fwhm_hz: h.fwhm,
            freq_start_hz: h.freq_start,
            freq_stop_hz: h.freq_stop,
            n_points: h.n_points,
            power_level_counts: h.power_level,
            power_slope: h.power_slope,
            fluor_gain: h.fluor_gain,
            offset_fluor_counts: h.offset_fluor,
            offset_power_counts: h.offset_power,
            aom_off_start: h.aom_off_range.start,
            aom_off_end: h.aom_off_range.end,
            decay_amplitude: 1.0,
            decay_tau_s: 0.072,
            decay_offset: 0.1,
            wait_times_s: (0..26).map(|i| i as f64 * 0.02).collect(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    pub fn material(&self) -> MaterialParams {
        let m = &self.material;
        MaterialParams {
            sat_intensity: m.sat_intensity_w_per_m2,
            sigma_ion: m.sigma_ion_m2,
            sigma_rec: m.sigma_rec_m2,
            photoioniz_fwhm: m.photoioniz_fwhm_hz,
            vac_wavelength: m.vac_wavelength_m,
            refr_index: m.refr_index,
            hom_linewidth0: m.hom_linewidth0_hz,
            ion_density: m.ion_density_per_m3,
            fluor_rate: m.fluor_rate_per_s,
            g_ratio: m.g_ratio,
            coll0: m.coll0,
        }
    }

    pub fn model(&self) -> holeburn::Result<TrapModel> {
        let mut model = TrapModel::new(self.material(), self.beam.focus_fwhm_m)?;
        if self.material.rates == RateSource::Table {
            model.calibrate_ionization(
                self.material.gamma_ion_ref_per_s,
                self.material.gamma_ion_ref_power_w,
            )?;
            model.gamma_rec_spon = self.material.gamma_rec_spon_per_s;
            model.validate()?;
        }
        Ok(model)
    }

    pub fn domain(&self) -> IntegrationDomain {
        let i = &self.integration;
        IntegrationDomain {
            r_max: i.r_max_m,
            z_halfwidth: i.z_halfwidth_m,
            delta_halfwidth: i.delta_halfwidth_hz,
            n_r: i.n_r,
            n_z: i.n_z,
            n_delta: i.n_delta,
            spectral: i.spectral,
        }
    }

    /// 0, step, 2 step, ... up to and including `t_end_s`.
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        let (end, step) = (self.integration.t_end_s, self.integration.t_step_s);
        if !(end.is_finite() && end >= 0.0) {
            return Err(CliError::Input(format!("t_end_s must be >= 0, got {end}")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(CliError::Input(format!("t_step_s must be > 0, got {step}")));
        }
        let n = (end / step * (1.0 + 1e-12)).floor() as usize + 1;
        Ok((0..n).map(|i| i as f64 * step).collect())
    }

    pub fn scale(&self, power: f64) -> ScaledSignalParams {
        ScaledSignalParams {
            scale_a: self.fit.scale_a,
            background_b: self.fit.background_b_counts_per_w,
            power,
        }
    }

    pub fn simplex(&self) -> SimplexOptions {
        SimplexOptions {
            x_tol: self.fit.x_tol,
            f_tol: self.fit.f_tol,
            max_iterations: self.fit.max_iterations,
            restarts: self.fit.restarts,
        }
    }

    pub fn trap_fit(&self) -> holeburn::Result<TrapFitConfig> {
        Ok(TrapFitConfig {
            model: self.model()?,
            domain: self.domain(),
            compression_bins: self.fit.compression_bins,
            gamma_seed: self.fit.gamma_seed_per_s,
            simplex: self.simplex(),
        })
    }

    pub fn zeeman(&self) -> ZeemanConfig {
        let z = &self.zeeman;
        ZeemanConfig {
            g_ground: z.g_ground_hz_per_t,
            g_excited: z.g_excited_hz_per_t,
            stray_field: z.stray_field_t,
            field_sign: z.field_sign,
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            kind: self.synth.noise,
            seed: self.synth.seed,
            gaussian_sigma: self.synth.gaussian_sigma,
        }
    }

    pub fn aom_off(&self) -> Range<usize> {
        self.synth.aom_off_start..self.synth.aom_off_end
    }

    pub fn hole_scan(&self) -> HoleScanSpec {
        let s = &self.synth;
        HoleScanSpec {
            baseline: s.hole_baseline,
            depth: s.hole_depth,
            center: s.hole_center_hz,
            fwhm: s.hole_fwhm_hz,
            freq_start: s.freq_start_hz,
            freq_stop: s.freq_stop_hz,
            n_points: s.n_points,
            power_level: s.power_level_counts,
            power_slope: s.power_slope,
            fluor_gain: s.fluor_gain,
            offset_fluor: s.offset_fluor_counts,
            offset_power: s.offset_power_counts,
            aom_off_range: self.aom_off(),
        }
    }
}
