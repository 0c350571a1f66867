use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_finite, lstsq, std_errors, FitParam};
use crate::error::{bad_data, Error, Result};
use crate::simplex::{minimize, SimplexOptions};
use crate::trace::{moving_average, EdgeMode};

/// Constant minus Lorentzian: `c - d (w/2)² / ((f - f0)² + (w/2)²)`.
pub fn lorentzian_hole(f: f64, baseline: f64, depth: f64, center: f64, fwhm: f64) -> f64 {
    let h = 0.5 * fwhm;
    let x = f - center;
    baseline - depth * h * h / (x * x + h * h)
}

/// A hole's FWHM bounds the homogeneous linewidth from above by half its value.
pub fn hom_linewidth_from_hole(fwhm: f64) -> f64 {
    fwhm / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianHoleFit {
    pub baseline: FitParam,
    pub depth: FitParam,
    pub center: FitParam,
    pub fwhm: FitParam,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// False when the depth is not significantly above zero.
    pub hole_detected: bool,
}

impl LorentzianHoleFit {
    pub fn eval(&self, f: f64) -> f64 {
        lorentzian_hole(
            f,
            self.baseline.value,
            self.depth.value,
            self.center.value,
            self.fwhm.value,
        )
    }
}

struct Problem<'a> {
    u: Vec<f64>,
    y: DVector<f64>,
    weights: Option<&'a [f64]>,
}

impl Problem<'_> {
    /// Best (c, d) with d ≥ 0 and the weighted residual for a profile centred
    /// at `u0` with half-width `h` (normalized units).
    fn inner(&self, u0: f64, h: f64) -> Option<(f64, f64, f64)> {
        let n = self.u.len();
        let w = |i: usize| self.weights.map_or(1.0, |s| 1.0 / s[i]);
        let shape = |i: usize| {
            let x = self.u[i] - u0;
            h * h / (x * x + h * h)
        };
        let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { w(i) } else { -shape(i) * w(i) });
        let yw = DVector::from_fn(n, |i, _| self.y[i] * w(i));
        let rss = |c: f64, d: f64| -> f64 {
            (0..n)
                .map(|i| (yw[i] - w(i) * (c - d * shape(i))).powi(2))
                .sum()
        };
        match lstsq(&a, &yw) {
            Some(coef) if coef[1] >= 0.0 => Some((coef[0], coef[1], rss(coef[0], coef[1]))),
            _ => {
                // depth clamped at zero: weighted mean baseline
                let (sw, swy) =
                    (0..n).fold((0.0, 0.0), |(a, b), i| (a + w(i) * w(i), b + w(i) * yw[i]));
                let c = swy / sw;
                Some((c, 0.0, rss(c, 0.0)))
            }
        }
    }
}

/// Least-squares constant-minus-Lorentzian fit to an unsmoothed scan.
///
/// `sigma_point`, when given, weights each point by 1/σ² and makes the
/// reported uncertainties absolute; otherwise they are scaled by the residual
/// variance.
pub fn fit_hole_lorentzian(
    freq: &[f64],
    signal: &[f64],
    sigma_point: Option<&[f64]>,
) -> Result<LorentzianHoleFit> {
    if freq.len() != signal.len() {
        return Err(bad_data("frequency and signal must have equal length"));
    }
    if freq.len() < 8 {
        return Err(bad_data(format!(
            "hole fit needs >= 8 points, got {}",
            freq.len()
        )));
    }
    check_finite("freq", freq)?;
    check_finite("signal", signal)?;
    if let Some(s) = sigma_point {
        if s.len() != freq.len() || s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad_data(
                "sigma_point must be positive with one value per point",
            ));
        }
    }
    let fmin = freq.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = freq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = fmax - fmin;
    if !(span > 0.0) {
        return Err(bad_data("frequency axis must span a nonzero interval"));
    }
    let mid = 0.5 * (fmin + fmax);
    let problem = Problem {
        u: freq.iter().map(|f| (f - mid) / span).collect(),
        y: DVector::from_column_slice(signal),
        weights: sigma_point,
    };

    // seed the centre at the minimum of a lightly smoothed copy; the fit itself
    // uses the raw points
    let window = (signal.len() / 100).max(1) | 1;
    let smooth = moving_average(signal, window, EdgeMode::Truncate)?;
    let imin = smooth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let seed = [problem.u[imin], (0.05f64).ln()];

    let objective = |x: &[f64]| {
        problem
            .inner(x[0], x[1].exp())
            .map_or(f64::INFINITY, |r| r.2)
    };
    let opts = SimplexOptions {
        restarts: 1,
        ..Default::default()
    };
    let res = minimize(objective, &seed, &opts);
    let (u0, h) = (res.x[0], res.x[1].exp());
    let (c, d, rss) = problem
        .inner(u0, h)
        .ok_or_else(|| Error::FitFailed("singular design at the optimum".into()))?;
    let center = mid + u0 * span;
    let fwhm = 2.0 * h * span;
    if !(fwhm.is_finite() && fwhm > 0.0) {
        return Err(Error::FitFailed(format!("nonpositive FWHM {fwhm}")));
    }
    if !res.converged {
        return Err(Error::FitFailed(format!(
            "simplex did not converge after {} iterations (fwhm {fwhm:.4e}, center {center:.4e})",
            res.iterations
        )));
    }

    let hh = 0.5 * fwhm;
    let n = freq.len();
    let jac = DMatrix::from_fn(n, 4, |i, j| {
        let w = sigma_point.map_or(1.0, |s| 1.0 / s[i]);
        let x = freq[i] - center;
        let den = x * x + hh * hh;
        let lor = hh * hh / den;
        w * match j {
            0 => 1.0,
            1 => -lor,
            2 => -d * 2.0 * x * hh * hh / (den * den),
            _ => -d * hh * x * x / (den * den),
        }
    });
    let se = std_errors(&jac, rss, sigma_point.is_some());
    let hole_detected = d > 0.0 && se[1].is_none_or(|s| d > 2.0 * s);
    Ok(LorentzianHoleFit {
        baseline: FitParam::new(c, se[0]),
        depth: FitParam::new(d, se[1]),
        center: FitParam::new(center, se[2]),
        fwhm: FitParam::new(fwhm, se[3]),
        residual: rss,
        converged: res.converged,
        iterations: res.iterations,
        hole_detected,
    })
}
