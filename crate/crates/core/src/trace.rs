//! Two-step treatment of recorded hole scans (background subtraction, then
//! point-by-point power normalization) and the hole-area error budget.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{bad_data, invalid, Result};

/// Points whose background-subtracted power is at or below this fraction of
/// the maximum power count as laser-off.
pub const ZERO_POWER_FRACTION: f64 = 1e-3;

/// Relative level (of the channel's max |value|) below which the AOM-off mean
/// counts as already subtracted.
const BACKGROUND_FREE_TOL: f64 = 1e-9;

/// One recorded frequency scan: fluorescence and reference-power channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScan {
    pub freq: Vec<f64>,
    pub fluor_counts: Vec<f64>,
    pub power_monitor: Vec<f64>,
    /// Indices where the AOM was switched off (detector background only).
    pub aom_off_range: Range<usize>,
}

impl RawScan {
    pub fn validate(&self) -> Result<()> {
        let n = self.freq.len();
        if self.fluor_counts.len() != n || self.power_monitor.len() != n {
            return Err(bad_data("scan channels differ in length"));
        }
        if self.aom_off_range.is_empty() {
            return Err(invalid("AOM-off range is empty"));
        }
        if self.aom_off_range.end > n {
            return Err(invalid(format!(
                "AOM-off range {:?} exceeds trace length {n}",
                self.aom_off_range
            )));
        }
        for (name, ch) in [
            ("freq", &self.freq),
            ("fluor_counts", &self.fluor_counts),
            ("power_monitor", &self.power_monitor),
        ] {
            if ch.iter().any(|v| !v.is_finite()) {
                return Err(bad_data(format!("{name} contains non-finite values")));
            }
        }
        Ok(())
    }

    fn off_mean(&self, ch: &[f64]) -> f64 {
        let r = self.aom_off_range.clone();
        ch[r.clone()].iter().sum::<f64>() / r.len() as f64
    }

    /// Whether both channels already read ≈ 0 in the AOM-off region.
    pub fn is_background_free(&self) -> bool {
        [&self.fluor_counts, &self.power_monitor].iter().all(|ch| {
            let scale = ch.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            self.off_mean(ch).abs() <= BACKGROUND_FREE_TOL * scale
        })
    }
}

/// Power-normalized scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScan {
    pub freq: Vec<f64>,
    /// Fluorescence / power; NaN at excluded points.
    pub signal: Vec<f64>,
    /// Laser-off points, ascending.
    pub excluded: Vec<usize>,
    /// Per-point RMS noise, once estimated.
    pub sigma_point: Option<f64>,
}

impl NormalizedScan {
    pub fn is_excluded(&self, i: usize) -> bool {
        self.excluded.binary_search(&i).is_ok()
    }

    /// Indices that carry data.
    pub fn included(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.signal.len()).filter(|&i| !self.is_excluded(i))
    }

    /// Mean signal over a frequency window, ignoring excluded points.
    pub fn mean_in_band(&self, lo: f64, hi: f64) -> Option<f64> {
        let (s, n) = self
            .included()
            .filter(|&i| self.freq[i] >= lo && self.freq[i] <= hi)
            .fold((0.0, 0usize), |(s, n), i| (s + self.signal[i], n + 1));
        (n > 0).then(|| s / n as f64)
    }

    /// Signal divided by `level` (e.g. the mean above some frequency).
    pub fn rescaled(&self, level: f64) -> Self {
        Self {
            signal: self.signal.iter().map(|s| s / level).collect(),
            sigma_point: self.sigma_point.map(|s| s / level),
            ..self.clone()
        }
    }
}

/// Subtract the AOM-off mean of each channel from that whole channel.
pub fn subtract_background(scan: &RawScan) -> Result<RawScan> {
    scan.validate()?;
    let fo = scan.off_mean(&scan.fluor_counts);
    let po = scan.off_mean(&scan.power_monitor);
    Ok(RawScan {
        freq: scan.freq.clone(),
        fluor_counts: scan.fluor_counts.iter().map(|v| v - fo).collect(),
        power_monitor: scan.power_monitor.iter().map(|v| v - po).collect(),
        aom_off_range: scan.aom_off_range.clone(),
    })
}

/// Divide fluorescence by power point by point. Points inside the AOM-off
/// segment or with power at or below the zero threshold are excluded.
/// Refuses scans whose background has not been subtracted.
pub fn normalize_by_power(scan: &RawScan) -> Result<NormalizedScan> {
    scan.validate()?;
    if !scan.is_background_free() {
        return Err(invalid(
            "background not subtracted: AOM-off region mean is not zero",
        ));
    }
    let pmax = scan
        .power_monitor
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let eps = ZERO_POWER_FRACTION * pmax.max(0.0);
    let mut excluded = Vec::new();
    let signal = scan
        .fluor_counts
        .iter()
        .zip(&scan.power_monitor)
        .enumerate()
        .map(|(i, (f, p))| {
            if *p <= eps || scan.aom_off_range.contains(&i) {
                excluded.push(i);
                f64::NAN
            } else {
                f / p
            }
        })
        .collect::<Vec<_>>();
    if excluded.len() == signal.len() {
        return Err(bad_data("every point has zero laser power"));
    }
    Ok(NormalizedScan {
        freq: scan.freq.clone(),
        signal,
        excluded,
        sigma_point: None,
    })
}

/// Edge handling for [`moving_average`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EdgeMode {
    /// Average only over the part of the window inside the trace.
    #[default]
    Truncate,
    /// Wrap around (circular convolution); preserves the trace mean.
    Periodic,
}

/// Centered moving mean. Even windows reach one sample further back than forward.
pub fn moving_average(data: &[f64], window: usize, edges: EdgeMode) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(invalid("moving-average window must be >= 1"));
    }
    let n = data.len();
    if window > n {
        return Err(invalid(format!(
            "window {window} larger than trace of {n} points"
        )));
    }
    let back = window / 2;
    let fwd = window - 1 - back;
    Ok(match edges {
        EdgeMode::Truncate => (0..n)
            .map(|i| {
                let lo = i.saturating_sub(back);
                let hi = (i + fwd + 1).min(n);
                data[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            })
            .collect(),
        EdgeMode::Periodic => (0..n)
            .map(|i| {
                (0..window)
                    .map(|j| data[(i + n + j - back) % n])
                    .sum::<f64>()
                    / window as f64
            })
            .collect(),
    })
}

pub const MIN_RMS_POINTS: usize = 16;

/// RMS deviation of a hole-free normalized trace from its mean level.
pub fn point_rms(scan: &NormalizedScan) -> Result<f64> {
    let vals: Vec<f64> = scan.included().map(|i| scan.signal[i]).collect();
    if vals.len() < MIN_RMS_POINTS {
        return Err(bad_data(format!(
            "RMS estimate needs >= {MIN_RMS_POINTS} valid points, got {}",
            vals.len()
        )));
    }
    let n = vals.len() as f64;
    let baseline = vals.iter().sum::<f64>() / n;
    Ok((vals.iter().map(|v| (v - baseline).powi(2)).sum::<f64>() / n).sqrt())
}

/// Hole area below a baseline and its propagated error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleArea {
    /// Σ (baseline - signal), signal·point units.
    pub area: f64,
    /// √(Σ σ_point²), signal·point units.
    pub sigma_area: f64,
    /// Mean frequency step of the scan, Hz.
    pub freq_step: f64,
    /// Area in signal·Hz units.
    pub area_hz: f64,
    pub sigma_area_hz: f64,
    pub n_points: usize,
}

/// Area and error over the given indices; excluded points are skipped.
pub fn hole_area_over(
    scan: &NormalizedScan,
    baseline: f64,
    sigma_point: f64,
    indices: impl IntoIterator<Item = usize>,
) -> Result<HoleArea> {
    if !baseline.is_finite() {
        return Err(invalid("baseline must be finite"));
    }
    if !(sigma_point.is_finite() && sigma_point >= 0.0) {
        return Err(invalid("sigma_point must be finite and >= 0"));
    }
    let mut area = 0.0;
    let mut var = 0.0;
    let mut n_points = 0;
    for i in indices {
        if i >= scan.signal.len() {
            return Err(invalid(format!("index {i} outside the scan")));
        }
        if scan.is_excluded(i) {
            continue;
        }
        area += baseline - scan.signal[i];
        var += sigma_point * sigma_point;
        n_points += 1;
    }
    let n = scan.freq.len();
    let freq_step = if n > 1 {
        (scan.freq[n - 1] - scan.freq[0]).abs() / (n - 1) as f64
    } else {
        0.0
    };
    let sigma_area = var.sqrt();
    Ok(HoleArea {
        area,
        sigma_area,
        freq_step,
        area_hz: area * freq_step,
        sigma_area_hz: sigma_area * freq_step,
        n_points,
    })
}

/// Area and error over the whole scan.
pub fn hole_area_with_error(
    scan: &NormalizedScan,
    baseline: f64,
    sigma_point: f64,
) -> Result<HoleArea> {
    hole_area_over(scan, baseline, sigma_point, 0..scan.signal.len())
}

/// Heuristic: the longest run of points whose power reads below
/// `ZERO_POWER_FRACTION` of the range above the minimum.
pub fn detect_aom_off(power: &[f64]) -> Option<Range<usize>> {
    let lo = power.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = power.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let thr = lo + ZERO_POWER_FRACTION * (hi - lo) * 10.0;
    let mut best: Option<Range<usize>> = None;
    let mut start = None;
    for (i, &p) in power
        .iter()
        .chain(std::iter::once(&f64::INFINITY))
        .enumerate()
    {
        match (p <= thr, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if best.as_ref().is_none_or(|b| i - s > b.len()) {
                    best = Some(s..i);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(fluor: Vec<f64>, power: Vec<f64>, off: Range<usize>) -> RawScan {
        RawScan {
            freq: (0..fluor.len()).map(|i| i as f64 * 1e5).collect(),
            fluor_counts: fluor,
            power_monitor: power,
            aom_off_range: off,
        }
    }

    #[test]
    fn constant_offset_subtracts_to_zero() {
        let s = raw(vec![100.0; 20], vec![100.0; 20], 0..4);
        let out = subtract_background(&s).unwrap();
        assert!(out.fluor_counts.iter().all(|&v| v == 0.0));
        assert!(out.power_monitor.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn channels_use_their_own_offset() {
        let mut f = vec![10.0; 4];
        f.extend(vec![60.0; 16]);
        let mut p = vec![3.0; 4];
        p.extend(vec![28.0; 16]);
        let out = subtract_background(&raw(f, p, 0..4)).unwrap();
        assert_eq!(out.fluor_counts[10], 50.0);
        assert_eq!(out.power_monitor[10], 25.0);
        let norm = normalize_by_power(&out).unwrap();
        assert_eq!(norm.excluded, vec![0, 1, 2, 3]);
        assert_eq!(norm.signal[10], 2.0);
    }

    #[test]
    fn empty_off_range_rejected() {
        assert!(subtract_background(&raw(vec![1.0; 8], vec![1.0; 8], 3..3)).is_err());
        assert!(subtract_background(&raw(vec![1.0; 8], vec![1.0; 8], 6..10)).is_err());
    }

    #[test]
    fn normalize_refuses_untreated_scan() {
        let mut f = vec![5.0; 4];
        f.extend(vec![60.0; 16]);
        let s = raw(f, vec![2.0; 20], 0..4);
        assert!(normalize_by_power(&s).is_err());
    }

    #[test]
    fn all_dark_scan_rejected() {
        let s = raw(vec![0.0; 10], vec![0.0; 10], 0..2);
        assert!(normalize_by_power(&s).is_err());
    }

    #[test]
    fn moving_average_basics() {
        let d: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        assert_eq!(moving_average(&d, 1, EdgeMode::Truncate).unwrap(), d);
        let c = vec![4.0; 9];
        assert_eq!(moving_average(&c, 5, EdgeMode::Truncate).unwrap(), c);
        assert!(moving_average(&c, 10, EdgeMode::Truncate).is_err());
        assert!(moving_average(&c, 0, EdgeMode::Truncate).is_err());
        let m = moving_average(&[1.0, 2.0, 3.0, 4.0], 3, EdgeMode::Truncate).unwrap();
        assert_eq!(m, vec![1.5, 2.0, 3.0, 3.5]);
    }

    #[test]
    fn rms_cases() {
        let flat = NormalizedScan {
            freq: (0..32).map(|i| i as f64).collect(),
            signal: vec![1.0; 32],
            excluded: vec![],
            sigma_point: None,
        };
        assert_eq!(point_rms(&flat).unwrap(), 0.0);
        let short = NormalizedScan {
            signal: vec![1.0; 10],
            freq: vec![0.0; 10],
            ..flat.clone()
        };
        assert!(point_rms(&short).is_err());
    }

    #[test]
    fn area_error_is_root_n() {
        let scan = NormalizedScan {
            freq: (0..50).map(|i| i as f64).collect(),
            signal: vec![1.0; 50],
            excluded: vec![3, 4],
            sigma_point: None,
        };
        let a = hole_area_with_error(&scan, 1.0, 0.2).unwrap();
        assert_eq!(a.n_points, 48);
        assert!((a.sigma_area - 0.2 * 48f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.area, 0.0);
    }

    #[test]
    fn detects_off_segment() {
        let mut p = vec![0.01; 5];
        p.extend(vec![10.0; 20]);
        assert_eq!(detect_aom_off(&p), Some(0..5));
    }
}
