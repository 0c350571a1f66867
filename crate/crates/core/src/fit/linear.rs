use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::check_finite;
use crate::error::{bad_data, invalid, Result};

pub const DEFAULT_CONFIDENCE: f64 = 0.80;

/// Ordinary least-squares line with two-sided Student-t intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub confidence: f64,
    /// Half-width of the slope interval at `confidence`.
    pub slope_ci: f64,
    pub intercept_ci: f64,
    pub residual: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn slope_covers(&self, truth: f64) -> bool {
        (truth - self.slope).abs() <= self.slope_ci
    }
}

pub fn fit_linear_ci(x: &[f64], y: &[f64], confidence: f64) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(bad_data("x and y must have equal length"));
    }
    if x.len() < 3 {
        return Err(bad_data(format!(
            "linear fit needs >= 3 points, got {}",
            x.len()
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    check_finite("x", x)?;
    check_finite("y", y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * x.iter().map(|v| v * v).sum::<f64>() {
        return Err(bad_data("rank-deficient input: all x values are equal"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let dof = n - 2.0;
    let s2 = residual / dof;
    let slope_stderr = (s2 / sxx).sqrt();
    let intercept_stderr = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| invalid(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        confidence,
        slope_ci: t * slope_stderr,
        intercept_ci: t * intercept_stderr,
        residual,
        n: x.len(),
    })
}
