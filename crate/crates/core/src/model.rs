//! Closed-form pieces of the four-level (4f, 5d, conduction band, trap)
//! rate-equation model.
//!
//! The 4f, 5d and conduction-band populations are slaved to the local
//! excitation intensity at every instant; only the trap population evolves,
//! which gives the single-exponential depletion `exp(-gamma_trap * k * t)` at
//! every point of the focal volume.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::photon_energy;
use crate::error::{invalid, Result};

/// Fixed constants of the crystal and the 4f-5d transition. SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    /// 4f-5d saturation intensity, W/m².
    pub sat_intensity: f64,
    /// 5d to conduction band ionization cross-section, m².
    pub sigma_ion: f64,
    /// Conduction band to 5d recombination cross-section, m².
    pub sigma_rec: f64,
    /// FWHM of the excited-state photoionization spectrum, Hz.
    pub photoioniz_fwhm: f64,
    /// Vacuum excitation wavelength, also used as the de-excitation wavelength, m.
    pub vac_wavelength: f64,
    pub refr_index: f64,
    /// Unbroadened homogeneous linewidth, Hz.
    pub hom_linewidth0: f64,
    /// Ce density per unit volume and per unit of inhomogeneous frequency, ions/m³/Hz.
    pub ion_density: f64,
    /// 5d radiative decay rate, 1/s.
    pub fluor_rate: f64,
    /// Degeneracy ratio g_5d / g_cb.
    pub g_ratio: f64,
    /// Peak collection efficiency at the focus.
    pub coll0: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            sat_intensity: 1.4e7,
            sigma_ion: 1e-22,
            sigma_rec: 1e-20,
            photoioniz_fwhm: 82e12,
            vac_wavelength: 371e-9,
            refr_index: 1.8,
            hom_linewidth0: 4e6,
            ion_density: 6e10,
            fluor_rate: 1.0 / 40e-9,
            g_ratio: 1.0,
            coll0: 0.016,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sat_intensity", self.sat_intensity),
            ("sigma_ion", self.sigma_ion),
            ("sigma_rec", self.sigma_rec),
            ("photoioniz_fwhm", self.photoioniz_fwhm),
            ("vac_wavelength", self.vac_wavelength),
            ("refr_index", self.refr_index),
            ("hom_linewidth0", self.hom_linewidth0),
            ("ion_density", self.ion_density),
            ("fluor_rate", self.fluor_rate),
            ("g_ratio", self.g_ratio),
            ("coll0", self.coll0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.coll0 > 1.0 {
            return Err(invalid(format!(
                "coll0 must lie in (0, 1], got {}",
                self.coll0
            )));
        }
        Ok(())
    }

    /// Wavelength inside the crystal, m.
    pub fn medium_wavelength(&self) -> f64 {
        self.vac_wavelength / self.refr_index
    }
}

/// Focused Gaussian beam. Waist and Rayleigh length are derived from the
/// focus FWHM at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    power: f64,
    focus_fwhm: f64,
    waist: f64,
    rayleigh: f64,
}

impl BeamGeometry {
    pub fn new(power: f64, focus_fwhm: f64, vac_wavelength: f64, refr_index: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(invalid(format!("beam power must be >= 0, got {power}")));
        }
        if !(focus_fwhm.is_finite() && focus_fwhm > 0.0) {
            return Err(invalid(format!("focus FWHM must be > 0, got {focus_fwhm}")));
        }
        if !(vac_wavelength > 0.0 && refr_index > 0.0) {
            return Err(invalid("wavelength and refractive index must be > 0"));
        }
        let waist = focus_fwhm / (2.0 * std::f64::consts::LN_2).sqrt();
        let rayleigh = PI * waist * waist / (vac_wavelength / refr_index);
        Ok(Self {
            power,
            focus_fwhm,
            waist,
            rayleigh,
        })
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn focus_fwhm(&self) -> f64 {
        self.focus_fwhm
    }

    /// 1/e² intensity radius at the focus, m.
    pub fn waist(&self) -> f64 {
        self.waist
    }

    pub fn rayleigh(&self) -> f64 {
        self.rayleigh
    }

    /// Same beam at a different power.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        if !(power.is_finite() && power >= 0.0) {
            return Err(invalid(format!("beam power must be >= 0, got {power}")));
        }
        Ok(Self { power, ..*self })
    }

    /// Peak on-axis intensity at the focus, 2 P0 / (π w0²).
    pub fn peak_intensity(&self) -> f64 {
        2.0 * self.power / (PI * self.waist * self.waist)
    }

    /// Beam radius w(z).
    pub fn radius_at(&self, z: f64) -> f64 {
        let q = z / self.rayleigh;
        self.waist * (1.0 + q * q).sqrt()
    }

    /// Normalized spatial mode `(w0/w(z))² exp(-2r²/w(z)²)`, 1 at the focus centre.
    pub fn mode_shape(&self, r: f64, z: f64) -> f64 {
        let w = self.radius_at(z);
        let ratio = self.waist / w;
        ratio * ratio * (-2.0 * r * r / (w * w)).exp()
    }
}

/// Local intensity of the focused beam at cylindrical coordinates (r, z), W/m².
pub fn beam_intensity(r: f64, z: f64, geom: &BeamGeometry) -> f64 {
    geom.peak_intensity() * geom.mode_shape(r, z)
}

/// Spatially varying detection efficiency; same mode shape as the beam.
pub fn collection_efficiency(r: f64, z: f64, geom: &BeamGeometry, coll0: f64) -> f64 {
    coll0 * geom.mode_shape(r, z)
}

/// Population ratio R1 = N_4f / N_5d = 1 + 2 I_sat / I_exc.
///
/// Returns `None` for an unexcited point (`i_exc <= 0`); such a point is dark.
pub fn saturation_ratio(i_exc: f64, i_sat: f64) -> Option<f64> {
    if i_exc > 0.0 {
        Some(1.0 + 2.0 * i_sat / i_exc)
    } else {
        None
    }
}

/// Stimulated ionization rate σ_ion · I / E_γ, 1/s. Equal to the stimulated
/// recombination rate.
pub fn ionization_rate(intensity: f64, sigma_ion: f64, wavelength: f64) -> f64 {
    sigma_ion * intensity / photon_energy(wavelength)
}

/// Radiative conduction band → 5d rate `4 σ0 / λ² · g_5d/g_cb` with
/// σ0 = σ_rec · 2π · Δf.
pub fn spont_recombination_rate(
    sigma_rec: f64,
    delta_f: f64,
    lambda_deex: f64,
    g_ratio: f64,
) -> f64 {
    let sigma0 = sigma_rec * 2.0 * PI * delta_f;
    4.0 * sigma0 / (lambda_deex * lambda_deex) * g_ratio
}

/// R2 = N_5d / N_cb = 1 + Γ_rec,spon / Γ_ion. `None` when Γ_ion = 0 (no
/// conduction-band coupling).
pub fn cb_ratio(gamma_ion: f64, gamma_rec_spon: f64) -> Option<f64> {
    if gamma_ion > 0.0 {
        Some(1.0 + gamma_rec_spon / gamma_ion)
    } else {
        None
    }
}

/// Conduction-band fraction k = 1 / (R1 R2 + R2 + 1) of the untrapped ions.
pub fn steady_state_fractions(r1: f64, r2: f64) -> f64 {
    1.0 / (r1 * r2 + r2 + 1.0)
}

/// N_T(t) / N = 1 - exp(-Γ_trap k t).
pub fn trapped_fraction(t: f64, gamma_trap: f64, k: f64) -> f64 {
    -(-gamma_trap * k * t).exp_m1()
}

/// N_5d(t) = R2 k N exp(-Γ_trap k t).
pub fn excited_population(t: f64, n_total: f64, r2: f64, k: f64, gamma_trap: f64) -> f64 {
    r2 * k * n_total * (-gamma_trap * k * t).exp()
}

/// Γ_hom = Γ_hom⁰ √(1 + I/I_sat).
pub fn power_broadened_linewidth(i_exc: f64, params: &MaterialParams) -> f64 {
    params.hom_linewidth0 * (1.0 + i_exc / params.sat_intensity).sqrt()
}

/// Intensity seen by ions detuned by `delta` from the laser.
pub fn detuned_intensity(i_exc: f64, delta: f64, gamma_hom: f64) -> f64 {
    let half = 0.5 * gamma_hom;
    i_exc * half * half / (delta * delta + half * half)
}

/// Rates acting on an ion at a given local intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub gamma_ion: f64,
    pub gamma_rec_stim: f64,
    pub gamma_rec_spon: f64,
    pub gamma_trap: f64,
}

/// Steady-state response of one (r, z, Δ) class of ions at t = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalResponse {
    /// N_4f / N_5d; infinite at an unexcited point.
    pub r1: f64,
    /// N_5d / N_cb; `None` without conduction-band coupling.
    pub r2: Option<f64>,
    /// Conduction-band fraction of the untrapped population; 0 means never trapped.
    pub k: f64,
    /// N_5d / (N - N_T), the excited fraction of the untrapped population.
    pub excited_fraction: f64,
}

impl LocalResponse {
    pub const DARK: LocalResponse = LocalResponse {
        r1: f64::INFINITY,
        r2: None,
        k: 0.0,
        excited_fraction: 0.0,
    };
}

/// Populations at one point and instant. Units follow the total density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    pub n_4f: f64,
    pub n_5d: f64,
    pub n_cb: f64,
    pub n_trap: f64,
    pub total: f64,
}

impl PopulationState {
    /// Reconstruct all four populations from the steady-state ratios.
    pub fn at(t: f64, resp: &LocalResponse, total: f64, gamma_trap: f64) -> Self {
        match resp.r2 {
            Some(r2) if resp.r1.is_finite() => {
                let n_trap = total * trapped_fraction(t, gamma_trap, resp.k);
                let n_cb = resp.k * (total - n_trap);
                let n_5d = r2 * n_cb;
                let n_4f = resp.r1 * n_5d;
                Self {
                    n_4f,
                    n_5d,
                    n_cb,
                    n_trap,
                    total,
                }
            }
            _ if resp.r1.is_finite() => {
                // two-level steady state only, nothing reaches the conduction band
                let n_5d = total / (resp.r1 + 1.0);
                Self {
                    n_4f: total - n_5d,
                    n_5d,
                    n_cb: 0.0,
                    n_trap: 0.0,
                    total,
                }
            }
            _ => Self {
                n_4f: total,
                n_5d: 0.0,
                n_cb: 0.0,
                n_trap: 0.0,
                total,
            },
        }
    }

    pub fn sum(&self) -> f64 {
        self.n_4f + self.n_5d + self.n_cb + self.n_trap
    }
}

/// Material constants plus the optical setup: everything needed to evaluate
/// the trapping model except the beam power and the trap rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapModel {
    pub material: MaterialParams,
    /// Focus FWHM, m.
    pub focus_fwhm: f64,
    /// Spontaneous conduction band → 5d rate, 1/s.
    pub gamma_rec_spon: f64,
}

/// Reference point for the tabulated ionization rate: peak intensity of a
/// 200 µW beam.
pub const TABLE_ION_REFERENCE_POWER: f64 = 200e-6;
pub const TABLE_GAMMA_ION: f64 = 3e4;
pub const TABLE_GAMMA_REC_SPON: f64 = 2e8;
pub const TABLE_GAMMA_TRAP: f64 = 7e4;

impl TrapModel {
    /// Model with Γ_rec,spon computed from the radiative formula.
    pub fn new(material: MaterialParams, focus_fwhm: f64) -> Result<Self> {
        material.validate()?;
        let gamma_rec_spon = spont_recombination_rate(
            material.sigma_rec,
            material.photoioniz_fwhm,
            material.vac_wavelength,
            material.g_ratio,
        );
        let model = Self {
            material,
            focus_fwhm,
            gamma_rec_spon,
        };
        model.validate()?;
        Ok(model)
    }

    /// Default material with the tabulated rates: σ_ion rescaled so that Γ_ion
    /// is 3·10⁴ s⁻¹ at the peak of a 200 µW beam, Γ_rec,spon = 2·10⁸ s⁻¹.
    pub fn tabulated() -> Self {
        let mut model =
            Self::new(MaterialParams::default(), 1e-6).expect("default parameters are valid");
        model
            .calibrate_ionization(TABLE_GAMMA_ION, TABLE_ION_REFERENCE_POWER)
            .expect("reference calibration is valid");
        model.gamma_rec_spon = TABLE_GAMMA_REC_SPON;
        model
    }

    /// Rescale σ_ion so the local ionization rate equals `gamma_ion` at the
    /// peak intensity of a beam of `power`.
    pub fn calibrate_ionization(&mut self, gamma_ion: f64, power: f64) -> Result<()> {
        if !(gamma_ion > 0.0 && power > 0.0) {
            return Err(invalid("calibration rate and power must be > 0"));
        }
        let i_peak = self.beam(power)?.peak_intensity();
        self.material.sigma_ion = gamma_ion * photon_energy(self.material.vac_wavelength) / i_peak;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.focus_fwhm.is_finite() && self.focus_fwhm > 0.0) {
            return Err(invalid(format!(
                "focus FWHM must be > 0, got {}",
                self.focus_fwhm
            )));
        }
        if !(self.gamma_rec_spon.is_finite() && self.gamma_rec_spon >= 0.0) {
            return Err(invalid(format!(
                "gamma_rec_spon must be >= 0, got {}",
                self.gamma_rec_spon
            )));
        }
        Ok(())
    }

    pub fn beam(&self, power: f64) -> Result<BeamGeometry> {
        BeamGeometry::new(
            power,
            self.focus_fwhm,
            self.material.vac_wavelength,
            self.material.refr_index,
        )
    }

    pub fn rates(&self, intensity: f64, gamma_trap: f64) -> RateSet {
        let gamma_ion = ionization_rate(
            intensity,
            self.material.sigma_ion,
            self.material.vac_wavelength,
        );
        RateSet {
            gamma_ion,
            gamma_rec_stim: gamma_ion,
            gamma_rec_spon: self.gamma_rec_spon,
            gamma_trap,
        }
    }

    /// Steady-state response of ions detuned by `delta` at a point with beam
    /// intensity `intensity`. Detuning enters only the 4f-5d step; the
    /// photoionization step is broadband.
    pub fn local_response(&self, intensity: f64, delta: f64) -> LocalResponse {
        if intensity <= 0.0 {
            return LocalResponse::DARK;
        }
        let gamma_hom = power_broadened_linewidth(intensity, &self.material);
        let i_45 = detuned_intensity(intensity, delta, gamma_hom);
        let Some(r1) = saturation_ratio(i_45, self.material.sat_intensity) else {
            return LocalResponse::DARK;
        };
        let gamma_ion = ionization_rate(
            intensity,
            self.material.sigma_ion,
            self.material.vac_wavelength,
        );
        match cb_ratio(gamma_ion, self.gamma_rec_spon) {
            Some(r2) => {
                let k = steady_state_fractions(r1, r2);
                LocalResponse {
                    r1,
                    r2: Some(r2),
                    k,
                    excited_fraction: r2 * k,
                }
            }
            None => LocalResponse {
                r1,
                r2: None,
                k: 0.0,
                excited_fraction: 1.0 / (r1 + 1.0),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beam(power: f64) -> BeamGeometry {
        BeamGeometry::new(power, 1e-6, 371e-9, 1.8).unwrap()
    }

    #[test]
    fn saturation_ratio_values() {
        assert_eq!(saturation_ratio(5.0, 5.0), Some(3.0));
        assert_eq!(saturation_ratio(10.0, 5.0), Some(2.0));
        assert_relative_eq!(saturation_ratio(1e30, 1.4e7).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(saturation_ratio(0.0, 1.4e7), None);
    }

    #[test]
    fn ionization_rate_at_reference_peak() {
        // E_γ = hc/λ = 5.354e-19 J at 371 nm
        let e = photon_energy(371e-9);
        assert_relative_eq!(e, 5.3544e-19, max_relative = 1e-4);
        let i_peak = beam(200e-6).peak_intensity();
        assert_relative_eq!(i_peak, 1.765e8, max_relative = 1e-3);
        let g = ionization_rate(i_peak, 1e-22, 371e-9);
        assert_relative_eq!(g, 1e-22 * i_peak / e, max_relative = 1e-14);
        assert!((g / 3e4) < 2.0 && (g / 3e4) > 0.5, "{g}");
        assert_eq!(ionization_rate(0.0, 1e-22, 371e-9), 0.0);
        assert_relative_eq!(
            ionization_rate(2.0 * i_peak, 1e-22, 371e-9),
            2.0 * g,
            max_relative = 1e-15
        );
    }

    #[test]
    fn spont_recombination_values() {
        // 4 · 1e-20 · 2π · 82e12 / (371e-9)² = 1.4973e8
        let g = spont_recombination_rate(1e-20, 82e12, 371e-9, 1.0);
        assert_relative_eq!(g, 1.497_29e8, max_relative = 1e-4);
        assert!(g / 2e8 > 0.5 && g / 2e8 < 2.0);
        assert_eq!(spont_recombination_rate(1e-20, 82e12, 371e-9, 0.0), 0.0);
    }

    #[test]
    fn k_values() {
        assert_relative_eq!(steady_state_fractions(3.0, 2.0), 1.0 / 9.0);
        assert_relative_eq!(steady_state_fractions(1.0, 1.0), 1.0 / 3.0);
        assert!(steady_state_fractions(3.0, 1e300) < 1e-299);
        assert_eq!(cb_ratio(0.0, 2e8), None);
    }

    #[test]
    fn trap_and_excited_time_dependence() {
        let (g, k) = (7e4, 1e-5);
        assert_eq!(trapped_fraction(0.0, g, k), 0.0);
        assert_relative_eq!(trapped_fraction(1e9, g, k), 1.0);
        let tau = 1.0 / (g * k);
        assert_relative_eq!(
            trapped_fraction(tau, g, k),
            1.0 - (-1.0f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(excited_population(0.0, 6e10, 3.0, k, g), 3.0 * k * 6e10);
        assert_eq!(
            excited_population(5.0, 6e10, 3.0, k, 0.0),
            excited_population(0.0, 6e10, 3.0, k, 0.0)
        );
        let ratio =
            excited_population(tau, 6e10, 3.0, k, g) / excited_population(0.0, 6e10, 3.0, k, g);
        assert_relative_eq!(ratio, (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn beam_geometry_20uw() {
        let b = beam(20e-6);
        assert_relative_eq!(b.waist(), 0.849_32e-6, max_relative = 1e-4);
        // I0 = 2·20e-6/(π w0²) = 1.765e7 W/m², about 1.26 I_sat
        assert_relative_eq!(b.peak_intensity(), 1.7651e7, max_relative = 1e-3);
        assert_relative_eq!(
            b.rayleigh(),
            PI * b.waist().powi(2) * 1.8 / 371e-9,
            max_relative = 1e-14
        );
        let i0 = beam_intensity(0.0, 0.0, &b);
        assert_relative_eq!(
            beam_intensity(0.0, b.rayleigh(), &b),
            i0 / 2.0,
            max_relative = 1e-14
        );
        let w = b.radius_at(3e-6);
        assert_relative_eq!(
            beam_intensity(w, 3e-6, &b),
            beam_intensity(0.0, 3e-6, &b) * (-2.0f64).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn collection_matches_mode() {
        let b = beam(20e-6);
        assert_relative_eq!(collection_efficiency(0.0, 0.0, &b, 0.016), 0.016);
        assert_relative_eq!(
            collection_efficiency(0.0, b.rayleigh(), &b, 0.016),
            0.008,
            max_relative = 1e-14
        );
        for &(r, z) in &[(0.3e-6, 1e-6), (1e-6, -4e-6), (2.5e-6, 20e-6)] {
            let ratio = collection_efficiency(r, z, &b, 0.016) / beam_intensity(r, z, &b);
            assert_relative_eq!(ratio, 0.016 / b.peak_intensity(), max_relative = 1e-12);
        }
    }

    #[test]
    fn linewidth_and_detuning() {
        let m = MaterialParams::default();
        assert_eq!(power_broadened_linewidth(0.0, &m), 4e6);
        assert_relative_eq!(
            power_broadened_linewidth(m.sat_intensity, &m),
            4e6 * 2f64.sqrt()
        );
        assert_relative_eq!(power_broadened_linewidth(3.0 * m.sat_intensity, &m), 8e6);
        assert_eq!(detuned_intensity(7.0, 0.0, 4e6), 7.0);
        assert_relative_eq!(detuned_intensity(7.0, 2e6, 4e6), 3.5);
        assert!(detuned_intensity(7.0, 1e15, 4e6) < 1e-16);
    }

    #[test]
    fn zero_ionization_point_is_never_trapped() {
        let mut model = TrapModel::new(MaterialParams::default(), 1e-6).unwrap();
        model.material.sigma_ion = 0.0;
        let resp = model.local_response(1e7, 0.0);
        assert_eq!(resp.k, 0.0);
        assert!(resp.r2.is_none());
        let pop = PopulationState::at(10.0, &resp, 6e10, 7e4);
        assert_eq!(pop.n_trap, 0.0);
        assert_relative_eq!(pop.sum(), 6e10, max_relative = 1e-12);
        assert_relative_eq!(pop.n_4f / pop.n_5d, resp.r1, max_relative = 1e-12);
    }

    #[test]
    fn unexcited_point_is_dark() {
        let model = TrapModel::tabulated();
        assert_eq!(model.local_response(0.0, 0.0), LocalResponse::DARK);
        let pop = PopulationState::at(3.0, &LocalResponse::DARK, 6e10, 7e4);
        assert_eq!(pop.n_4f, 6e10);
        assert_eq!(pop.n_5d, 0.0);
    }

    #[test]
    fn tabulated_model_hits_reference_rate() {
        let m = TrapModel::tabulated();
        let i_peak = m.beam(200e-6).unwrap().peak_intensity();
        assert_relative_eq!(m.rates(i_peak, 7e4).gamma_ion, 3e4, max_relative = 1e-12);
        assert_eq!(m.gamma_rec_spon, 2e8);
    }

    #[test]
    fn invalid_material_rejected() {
        let m = MaterialParams {
            coll0: 1.5,
            ..Default::default()
        };
        assert!(m.validate().is_err());
        let m = MaterialParams {
            sat_intensity: 0.0,
            ..Default::default()
        };
        assert!(m.validate().is_err());
        assert!(BeamGeometry::new(-1.0, 1e-6, 371e-9, 1.8).is_err());
    }
}
