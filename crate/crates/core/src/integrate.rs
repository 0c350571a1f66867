//! Detected-signal integral over the focal volume and the inhomogeneous line.
//!
//! S(t) = ∫ f0 N_5d(t; r, z, Δ) coll(r, z) r dr dθ dz dΔ on a uniform midpoint
//! product grid. The integrand has no azimuthal dependence, so θ contributes
//! a factor 2π. Every (r, z, Δ) node decays independently with its own
//! `exp(-Γ_trap k t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::{collection_efficiency, BeamGeometry, TrapModel};

/// Spatial distribution of excitation intensity and detection efficiency.
pub trait OpticalProfile: Sync {
    /// Excitation intensity, W/m².
    fn intensity(&self, r: f64, z: f64) -> f64;
    /// Detection efficiency, dimensionless.
    fn collection(&self, r: f64, z: f64) -> f64;
}

/// Focused Gaussian beam with a matching confocal collection volume.
#[derive(Debug, Clone, Copy)]
pub struct GaussianFocus {
    pub beam: BeamGeometry,
    pub coll0: f64,
}

impl GaussianFocus {
    pub fn new(model: &TrapModel, power: f64) -> Result<Self> {
        Ok(Self {
            beam: model.beam(power)?,
            coll0: model.material.coll0,
        })
    }
}

impl OpticalProfile for GaussianFocus {
    fn intensity(&self, r: f64, z: f64) -> f64 {
        crate::model::beam_intensity(r, z, &self.beam)
    }

    fn collection(&self, r: f64, z: f64) -> f64 {
        collection_efficiency(r, z, &self.beam, self.coll0)
    }
}

/// Constant intensity and collection everywhere inside the integration box.
#[derive(Debug, Clone, Copy)]
pub struct UniformBox {
    pub intensity: f64,
    pub collection: f64,
}

impl OpticalProfile for UniformBox {
    fn intensity(&self, _r: f64, _z: f64) -> f64 {
        self.intensity
    }

    fn collection(&self, _r: f64, _z: f64) -> f64 {
        self.collection
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpectralSampling {
    /// Midpoint rule over [-delta_halfwidth, delta_halfwidth].
    #[default]
    Integrated,
    /// Only resonant ions (Δ = 0) with unit weight.
    Resonant,
}

/// Integration limits and grid counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationDomain {
    pub r_max: f64,
    pub z_halfwidth: f64,
    pub delta_halfwidth: f64,
    pub n_r: usize,
    pub n_z: usize,
    pub n_delta: usize,
    #[serde(default)]
    pub spectral: SpectralSampling,
}

impl Default for IntegrationDomain {
    fn default() -> Self {
        Self {
            r_max: 4e-6,
            z_halfwidth: 60e-6,
            delta_halfwidth: 100e6,
            n_r: 64,
            n_z: 64,
            n_delta: 128,
            spectral: SpectralSampling::Integrated,
        }
    }
}

pub const MIN_GRID_COUNT: usize = 8;

impl IntegrationDomain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_max", self.r_max),
            ("z_halfwidth", self.z_halfwidth),
            ("delta_halfwidth", self.delta_halfwidth),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, n) in [
            ("n_r", self.n_r),
            ("n_z", self.n_z),
            ("n_delta", self.n_delta),
        ] {
            if n < MIN_GRID_COUNT {
                return Err(invalid(format!(
                    "{name} must be >= {MIN_GRID_COUNT}, got {n}"
                )));
            }
        }
        Ok(())
    }

    /// Every grid count doubled, limits unchanged.
    pub fn refined(&self) -> Self {
        Self {
            n_r: 2 * self.n_r,
            n_z: 2 * self.n_z,
            n_delta: 2 * self.n_delta,
            ..*self
        }
    }

    /// All limits scaled by `factor`, grid counts scaled to keep the spacing.
    pub fn widened(&self, factor: f64) -> Self {
        let scale = |n: usize| ((n as f64) * factor).round() as usize;
        Self {
            r_max: self.r_max * factor,
            z_halfwidth: self.z_halfwidth * factor,
            delta_halfwidth: self.delta_halfwidth * factor,
            n_r: scale(self.n_r),
            n_z: scale(self.n_z),
            n_delta: scale(self.n_delta),
            ..*self
        }
    }

    pub fn node_count(&self) -> usize {
        let spectral = match self.spectral {
            SpectralSampling::Integrated => self.n_delta - self.n_delta / 2,
            SpectralSampling::Resonant => 1,
        };
        self.n_r * self.n_z * spectral
    }
}

/// Product-grid nodes with weights. Radial weights include the Jacobian and
/// the azimuthal 2π.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub radial: Vec<(f64, f64)>,
    pub axial: Vec<(f64, f64)>,
    pub spectral: Vec<(f64, f64)>,
}

impl Quadrature {
    pub fn from_domain(domain: &IntegrationDomain) -> Result<Self> {
        domain.validate()?;
        let dr = domain.r_max / domain.n_r as f64;
        let radial = (0..domain.n_r)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                (r, 2.0 * PI * r * dr)
            })
            .collect();
        let dz = 2.0 * domain.z_halfwidth / domain.n_z as f64;
        let axial = (0..domain.n_z)
            .map(|i| (-domain.z_halfwidth + (i as f64 + 0.5) * dz, dz))
            .collect();
        let spectral = match domain.spectral {
            SpectralSampling::Resonant => vec![(0.0, 1.0)],
            SpectralSampling::Integrated => folded_midpoint(domain.delta_halfwidth, domain.n_delta),
        };
        Ok(Self {
            radial,
            axial,
            spectral,
        })
    }
}

/// Symmetric midpoint rule on [-h, h] folded onto Δ ≥ 0; the integrand only
/// depends on Δ².
fn folded_midpoint(h: f64, n: usize) -> Vec<(f64, f64)> {
    let d = 2.0 * h / n as f64;
    (n / 2..n)
        .map(|j| {
            let x = -h + (j as f64 + 0.5) * d;
            if n % 2 == 1 && j == n / 2 {
                (0.0, d)
            } else {
                (x, 2.0 * d)
            }
        })
        .collect()
}

/// Per-node amplitude and conduction-band fraction: the signal is
/// `Σ amplitude · exp(-Γ_trap k t)`.
#[derive(Debug, Clone, Default)]
pub struct RateSpectrum {
    pub amplitude: Vec<f64>,
    pub k: Vec<f64>,
}

impl RateSpectrum {
    pub fn build<P: OpticalProfile>(
        model: &TrapModel,
        profile: &P,
        domain: &IntegrationDomain,
    ) -> Result<Self> {
        model.validate()?;
        let quad = Quadrature::from_domain(domain)?;
        let slices: Vec<Self> = quad
            .axial
            .par_iter()
            .map(|&(z, wz)| {
                let mut out = Self::default();
                for &(r, wr) in &quad.radial {
                    let intensity = profile.intensity(r, z);
                    let coll = profile.collection(r, z);
                    for &(delta, wd) in &quad.spectral {
                        let resp = model.local_response(intensity, delta);
                        let amp = wz
                            * wr
                            * wd
                            * model.material.fluor_rate
                            * model.material.ion_density
                            * resp.excited_fraction
                            * coll;
                        out.amplitude.push(amp);
                        out.k.push(resp.k);
                    }
                }
                out
            })
            .collect();
        let mut all = Self::default();
        for s in slices {
            all.amplitude.extend(s.amplitude);
            all.k.extend(s.k);
        }
        Ok(all)
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// S(t) at each time. Each sum runs in node order, so the result does not
    /// depend on the thread count.
    pub fn signal(&self, gamma_trap: f64, times: &[f64]) -> Vec<f64> {
        times
            .par_iter()
            .map(|&t| {
                self.amplitude
                    .iter()
                    .zip(&self.k)
                    .map(|(a, k)| a * (-gamma_trap * k * t).exp())
                    .sum()
            })
            .collect()
    }

    /// Merge nodes into `bins` logarithmic bins of k, keeping the total
    /// amplitude and the amplitude-weighted mean k of each bin. Nodes with
    /// k = 0 are merged into one constant term. The error is second order in
    /// the bin width.
    pub fn compressed(&self, bins: usize) -> Self {
        let positive = self.k.iter().copied().filter(|&k| k > 0.0);
        let (lo, hi) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), k| {
            (lo.min(k), hi.max(k))
        });
        let mut amp = vec![0.0; bins + 1];
        let mut moment = vec![0.0; bins + 1];
        let span = if hi > lo { (hi / lo).ln() } else { 1.0 };
        for (&a, &k) in self.amplitude.iter().zip(&self.k) {
            let idx = if k > 0.0 {
                let x = ((k / lo).ln() / span * bins as f64) as usize;
                1 + x.min(bins - 1)
            } else {
                0
            };
            amp[idx] += a;
            moment[idx] += a * k;
        }
        let mut out = Self::default();
        for (a, m) in amp.into_iter().zip(moment) {
            if a != 0.0 {
                out.amplitude.push(a);
                out.k.push(m / a);
            }
        }
        out
    }
}

/// Provenance of a computed S(t) table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub domain: IntegrationDomain,
    pub refinements: usize,
    /// Max relative change at the last refinement, when one was run.
    pub achieved_tolerance: Option<f64>,
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTable {
    pub times: Vec<f64>,
    pub model_signal: Vec<f64>,
    pub meta: SignalMeta,
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("time grid must be finite and nonnegative"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("time grid must be sorted ascending"));
    }
    Ok(())
}

/// S(t) on a single grid, streamed per z-slice without storing the node list.
pub fn detected_signal<P: OpticalProfile>(
    times: &[f64],
    model: &TrapModel,
    profile: &P,
    gamma_trap: f64,
    domain: &IntegrationDomain,
) -> Result<SignalTable> {
    check_times(times)?;
    model.validate()?;
    if !(gamma_trap.is_finite() && gamma_trap >= 0.0) {
        return Err(invalid(format!(
            "gamma_trap must be >= 0, got {gamma_trap}"
        )));
    }
    let quad = Quadrature::from_domain(domain)?;
    let scale = model.material.fluor_rate * model.material.ion_density;
    let partials: Vec<Vec<f64>> = quad
        .axial
        .par_iter()
        .map(|&(z, wz)| {
            let mut acc = vec![0.0; times.len()];
            for &(r, wr) in &quad.radial {
                let intensity = profile.intensity(r, z);
                let coll = profile.collection(r, z);
                if coll == 0.0 {
                    continue;
                }
                for &(delta, wd) in &quad.spectral {
                    let resp = model.local_response(intensity, delta);
                    let amp = wz * wr * wd * scale * resp.excited_fraction * coll;
                    if amp == 0.0 {
                        continue;
                    }
                    let rate = gamma_trap * resp.k;
                    for (s, &t) in acc.iter_mut().zip(times) {
                        *s += amp * (-rate * t).exp();
                    }
                }
            }
            acc
        })
        .collect();
    let mut model_signal = vec![0.0; times.len()];
    for slice in &partials {
        for (s, p) in model_signal.iter_mut().zip(slice) {
            *s += p;
        }
    }
    Ok(SignalTable {
        times: times.to_vec(),
        model_signal,
        meta: SignalMeta {
            domain: *domain,
            refinements: 0,
            achieved_tolerance: None,
            converged: None,
        },
    })
}

/// Max over t of |b/a - 1|; zero where both vanish.
pub fn max_relative_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if x == y {
                0.0
            } else if x == 0.0 {
                f64::INFINITY
            } else {
                ((y - x) / x).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub const DEFAULT_MAX_REFINEMENTS: usize = 3;

/// Doubles every grid count until S(t) changes by less than `rel_tol`
/// (max relative) between successive grids. Returns the finer table.
pub fn refine_until_converged<P: OpticalProfile>(
    times: &[f64],
    model: &TrapModel,
    profile: &P,
    gamma_trap: f64,
    domain: &IntegrationDomain,
    rel_tol: f64,
    max_refinements: usize,
) -> Result<SignalTable> {
    if !(rel_tol > 0.0) {
        return Err(Error::NotConverged {
            requested: rel_tol,
            achieved: f64::INFINITY,
            refinements: 0,
        });
    }
    let mut current = detected_signal(times, model, profile, gamma_trap, domain)?;
    let mut grid = *domain;
    let mut change = f64::INFINITY;
    for step in 1..=max_refinements {
        grid = grid.refined();
        let mut next = detected_signal(times, model, profile, gamma_trap, &grid)?;
        change = max_relative_change(&current.model_signal, &next.model_signal);
        next.meta.refinements = step;
        next.meta.achieved_tolerance = Some(change);
        if change < rel_tol {
            next.meta.converged = Some(true);
            return Ok(next);
        }
        current = next;
    }
    Err(Error::NotConverged {
        requested: rel_tol,
        achieved: change,
        refinements: max_refinements,
    })
}

/// Affine map from model units to detected counts/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledSignalParams {
    /// Detected counts per model-signal unit.
    pub scale_a: f64,
    /// Untrappable background, counts/s per W of beam power.
    pub background_b: f64,
    /// Beam power, W.
    pub power: f64,
}

impl ScaledSignalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_a.is_finite() && self.scale_a >= 0.0) {
            return Err(invalid(format!(
                "scale A must be >= 0, got {}",
                self.scale_a
            )));
        }
        if !(self.background_b.is_finite() && self.background_b >= 0.0) {
            return Err(invalid(format!(
                "background B must be >= 0, got {}",
                self.background_b
            )));
        }
        if !(self.power.is_finite() && self.power >= 0.0) {
            return Err(invalid(format!("power must be >= 0, got {}", self.power)));
        }
        Ok(())
    }
}

/// A · S + B · P0, elementwise.
pub fn scaled_signal(model_signal: &[f64], p: &ScaledSignalParams) -> Vec<f64> {
    let floor = p.background_b * p.power;
    model_signal.iter().map(|s| p.scale_a * s + floor).collect()
}
