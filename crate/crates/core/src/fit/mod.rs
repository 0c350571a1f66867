//! Least-squares estimators built on the simplex minimizer.
//!
//! Parameters that enter a model linearly (amplitudes, baselines, offsets,
//! the per-curve scale and the shared background) are eliminated by an exact
//! linear solve at every simplex step, so the simplex only explores the
//! nonlinear parameters.

mod expdecay;
mod hole;
mod linear;
mod trap;

pub use expdecay::{fit_exponential, ExpDecayFit};
pub use hole::{fit_hole_lorentzian, hom_linewidth_from_hole, lorentzian_hole, LorentzianHoleFit};
pub use linear::{fit_linear_ci, LinearFit, DEFAULT_CONFIDENCE};
pub use trap::{fit_trap_model, DecayCurve, TrapFitConfig, TrapFitResult};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Fitted value with a one-standard-deviation uncertainty, when the
/// covariance is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub value: f64,
    pub uncertainty: Option<f64>,
}

impl FitParam {
    pub fn new(value: f64, uncertainty: Option<f64>) -> Self {
        Self { value, uncertainty }
    }
}

/// Least squares with column equilibration. `None` if the design is rank
/// deficient.
pub(crate) fn lstsq(design: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let ncols = design.ncols();
    let mut scaled = design.clone();
    let mut norms = vec![1.0; ncols];
    for (j, norm) in norms.iter_mut().enumerate() {
        let n = scaled.column(j).norm();
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        *norm = n;
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= smax * 1e-13 {
        return None;
    }
    let sol = svd.solve(y, 0.0).ok()?;
    Some(DVector::from_iterator(
        ncols,
        sol.iter().zip(&norms).map(|(s, n)| s / n),
    ))
}

/// Parameter standard deviations from `cov = s² (JᵀJ)⁻¹`. With `absolute`
/// the residuals are already divided by known σ and s² = 1.
pub(crate) fn std_errors(jac: &DMatrix<f64>, rss: f64, absolute: bool) -> Vec<Option<f64>> {
    let (n, p) = jac.shape();
    if n <= p {
        return vec![None; p];
    }
    let s2 = if absolute { 1.0 } else { rss / (n - p) as f64 };
    // equilibrate before inverting
    let mut scaled = jac.clone();
    let mut norms = vec![1.0; p];
    for (j, norm) in norms.iter_mut().enumerate() {
        let c = scaled.column(j).norm();
        if c == 0.0 || !c.is_finite() {
            return vec![None; p];
        }
        *norm = c;
        scaled.column_mut(j).scale_mut(1.0 / c);
    }
    let jtj = scaled.transpose() * &scaled;
    match jtj.try_inverse() {
        Some(inv) => (0..p)
            .map(|j| {
                let v = inv[(j, j)] * s2;
                (v >= 0.0 && v.is_finite()).then(|| v.sqrt() / norms[j])
            })
            .collect(),
        None => vec![None; p],
    }
}

pub(crate) fn check_finite(name: &str, xs: &[f64]) -> crate::Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(crate::error::bad_data(format!(
            "{name} contains non-finite values"
        )))
    }
}
