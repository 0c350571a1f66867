//! Synthetic measurements with known ground truth.
//!
//! Random streams use ChaCha8 seeded with `NoiseSpec::seed` via
//! `SeedableRng::seed_from_u64`, with the ChaCha stream number set to the
//! curve index. The same (seed, index) always reproduces the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{invalid, Result};
use crate::fit::{lorentzian_hole, DecayCurve};
use crate::integrate::{
    detected_signal, scaled_signal, GaussianFocus, IntegrationDomain, ScaledSignalParams,
};
use crate::model::TrapModel;
use crate::trace::RawScan;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seed_from_u64(seed), stream = curve index";

/// Beam powers of the intensity-dependence series, W.
pub const SERIES_POWERS_W: [f64; 7] = [2e-6, 4e-6, 8e-6, 13e-6, 21e-6, 29e-6, 44e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    None,
    Poisson,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
    /// Standard deviation for Gaussian noise, in the units of the generated values.
    pub gaussian_sigma: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            seed: 0,
            gaussian_sigma: 0.0,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn poisson(seed: u64) -> Self {
        Self {
            kind: NoiseKind::Poisson,
            seed,
            gaussian_sigma: 0.0,
        }
    }

    pub fn gaussian(seed: u64, sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            seed,
            gaussian_sigma: sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == NoiseKind::Gaussian
            && !(self.gaussian_sigma.is_finite() && self.gaussian_sigma >= 0.0)
        {
            return Err(invalid("gaussian_sigma must be finite and >= 0"));
        }
        Ok(())
    }

    /// Independent generator for one curve of a batch.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Poisson draw; zero for a nonpositive mean.
fn poisson<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean)
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma)
        .map(|d| d.sample(rng))
        .unwrap_or(0.0)
}

/// Ground truth of a synthetic decay curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayTruth {
    pub gamma_trap: f64,
    pub scale_a: f64,
    pub background_b: f64,
    pub power_w: f64,
    pub bin_width_s: f64,
    pub noise: NoiseSpec,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDecay {
    pub curve: DecayCurve,
    /// Noiseless model signal S(t).
    pub model_signal: Vec<f64>,
    pub truth: DecayTruth,
}

pub struct DecayRequest<'a> {
    pub model: &'a TrapModel,
    pub domain: &'a IntegrationDomain,
    pub gamma_trap: f64,
    pub scale: ScaledSignalParams,
    pub times: &'a [f64],
    /// Photon-counting bin, s; Poisson noise is drawn on rate × bin counts.
    pub bin_width_s: f64,
}

/// A · S(t) + B · P0 on the time grid with the requested noise.
pub fn gen_decay_curve(
    req: &DecayRequest<'_>,
    noise: &NoiseSpec,
    stream: u64,
) -> Result<SyntheticDecay> {
    noise.validate()?;
    req.scale.validate()?;
    if !(req.bin_width_s.is_finite() && req.bin_width_s > 0.0) {
        return Err(invalid("bin width must be > 0"));
    }
    let prof = GaussianFocus::new(req.model, req.scale.power)?;
    let table = detected_signal(req.times, req.model, &prof, req.gamma_trap, req.domain)?;
    let clean = scaled_signal(&table.model_signal, &req.scale);
    let mut rng = noise.rng(stream);
    let counts_per_s = clean
        .iter()
        .map(|&rate| match noise.kind {
            NoiseKind::None => rate,
            NoiseKind::Poisson => poisson(&mut rng, rate * req.bin_width_s) / req.bin_width_s,
            NoiseKind::Gaussian => rate + gaussian(&mut rng, noise.gaussian_sigma),
        })
        .collect();
    Ok(SyntheticDecay {
        curve: DecayCurve {
            time_s: req.times.to_vec(),
            counts_per_s,
            power_w: req.scale.power,
        },
        model_signal: table.model_signal,
        truth: DecayTruth {
            gamma_trap: req.gamma_trap,
            scale_a: req.scale.scale_a,
            background_b: req.scale.background_b,
            power_w: req.scale.power,
            bin_width_s: req.bin_width_s,
            noise: *noise,
            stream,
        },
    })
}

/// Shape of a synthetic hole scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleScanSpec {
    /// Normalized baseline c.
    pub baseline: f64,
    /// Normalized depth d.
    pub depth: f64,
    /// Hole centre, Hz.
    pub center: f64,
    /// Hole FWHM, Hz.
    pub fwhm: f64,
    pub freq_start: f64,
    pub freq_stop: f64,
    pub n_points: usize,
    /// Power-monitor counts at the scan start.
    pub power_level: f64,
    /// Fractional power change from start to stop (AOM efficiency slope).
    pub power_slope: f64,
    /// Fluorescence counts per power-monitor count for a unit normalized signal.
    pub fluor_gain: f64,
    pub offset_fluor: f64,
    pub offset_power: f64,
    pub aom_off_range: Range<usize>,
}

impl Default for HoleScanSpec {
    fn default() -> Self {
        Self {
            baseline: 1.0,
            depth: 0.4,
            center: -50e6,
            fwhm: 6e6,
            freq_start: -100e6,
            freq_stop: 100e6,
            n_points: 5000,
            power_level: 1000.0,
            power_slope: -0.3,
            fluor_gain: 1.0,
            offset_fluor: 20.0,
            offset_power: 5.0,
            aom_off_range: 0..100,
        }
    }
}

impl HoleScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(invalid("scan needs >= 2 points"));
        }
        if !(self.freq_stop > self.freq_start) {
            return Err(invalid("freq_stop must exceed freq_start"));
        }
        if !(self.fwhm > 0.0) {
            return Err(invalid("hole FWHM must be > 0"));
        }
        if self.aom_off_range.is_empty() || self.aom_off_range.end > self.n_points {
            return Err(invalid(
                "AOM-off range must be nonempty and inside the scan",
            ));
        }
        if !(self.power_level > 0.0) || self.power_slope <= -1.0 {
            return Err(invalid("power must stay positive over the scan"));
        }
        Ok(())
    }

    pub fn freq(&self) -> Vec<f64> {
        let step = (self.freq_stop - self.freq_start) / (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.freq_start + i as f64 * step)
            .collect()
    }

    /// Noiseless normalized response c - Lorentzian.
    pub fn response(&self, f: f64) -> f64 {
        lorentzian_hole(f, self.baseline, self.depth, self.center, self.fwhm)
    }
}

/// Raw two-channel scan: `fluor = gain (c - L) power + offset_fluor`, with
/// laser power zero in the AOM-off segment. Poisson noise is applied to both
/// count channels; Gaussian noise only to the fluorescence channel.
pub fn gen_hole_scan(spec: &HoleScanSpec, noise: &NoiseSpec, stream: u64) -> Result<RawScan> {
    spec.validate()?;
    noise.validate()?;
    let freq = spec.freq();
    let n = freq.len();
    let mut rng = noise.rng(stream);
    let mut fluor = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    for (i, &f) in freq.iter().enumerate() {
        let p = if spec.aom_off_range.contains(&i) {
            0.0
        } else {
            spec.power_level * (1.0 + spec.power_slope * i as f64 / (n - 1) as f64)
        };
        let fl = spec.fluor_gain * spec.response(f) * p + spec.offset_fluor;
        let pw = p + spec.offset_power;
        let (fl, pw) = match noise.kind {
            NoiseKind::None => (fl, pw),
            NoiseKind::Poisson => (poisson(&mut rng, fl), poisson(&mut rng, pw)),
            NoiseKind::Gaussian => (fl + gaussian(&mut rng, noise.gaussian_sigma), pw),
        };
        fluor.push(fl);
        power.push(pw);
    }
    Ok(RawScan {
        freq,
        fluor_counts: fluor,
        power_monitor: power,
        aom_off_range: spec.aom_off_range.clone(),
    })
}

/// Hole area versus wait time: `a exp(-t/τ) + offset` with noise.
pub fn gen_hole_decay_series(
    amplitude: f64,
    tau: f64,
    offset: f64,
    wait_times: &[f64],
    noise: &NoiseSpec,
    stream: u64,
) -> Result<Vec<f64>> {
    noise.validate()?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(invalid("tau must be > 0"));
    }
    if wait_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("wait times must be ascending"));
    }
    let mut rng = noise.rng(stream);
    Ok(wait_times
        .iter()
        .map(|&t| {
            let v = amplitude * (-t / tau).exp() + offset;
            match noise.kind {
                NoiseKind::None => v,
                NoiseKind::Poisson => poisson(&mut rng, v),
                NoiseKind::Gaussian => v + gaussian(&mut rng, noise.gaussian_sigma),
            }
        })
        .collect())
}
