use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_finite, lstsq, std_errors, FitParam};
use crate::error::{bad_data, Error, Result};
use crate::simplex::{minimize, SimplexOptions};

/// `amplitude · exp(-t/tau) (+ offset)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayFit {
    pub amplitude: FitParam,
    pub tau: FitParam,
    /// Persistent floor; `None` when fitted without offset.
    pub offset: Option<FitParam>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl ExpDecayFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude.value * (-t / self.tau.value).exp() + self.offset.map_or(0.0, |o| o.value)
    }
}

fn design(times: &[f64], tau: f64, with_offset: bool) -> DMatrix<f64> {
    let cols = if with_offset { 2 } else { 1 };
    DMatrix::from_fn(times.len(), cols, |i, j| {
        if j == 0 {
            (-times[i] / tau).exp()
        } else {
            1.0
        }
    })
}

fn solve_linear(
    times: &[f64],
    y: &DVector<f64>,
    tau: f64,
    with_offset: bool,
) -> Option<(DVector<f64>, f64)> {
    let a = design(times, tau, with_offset);
    let coef = lstsq(&a, y)?;
    let rss = (&a * &coef - y).norm_squared();
    Some((coef, rss))
}

pub fn fit_exponential(times: &[f64], values: &[f64], with_offset: bool) -> Result<ExpDecayFit> {
    if times.len() != values.len() {
        return Err(bad_data("times and values must have equal length"));
    }
    if times.len() < 4 {
        return Err(bad_data(format!(
            "exponential fit needs >= 4 points, got {}",
            times.len()
        )));
    }
    check_finite("times", times)?;
    check_finite("values", values)?;
    let t0 = times.iter().copied().fold(f64::INFINITY, f64::min);
    let t1 = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(bad_data("times must span a nonzero interval"));
    }
    let y = DVector::from_column_slice(values);

    let objective = |ln_tau: f64| {
        solve_linear(times, &y, ln_tau.exp(), with_offset).map_or(f64::INFINITY, |(_, r)| r)
    };

    // coarse log scan for the seed, span/100 .. 10·span
    let seed = (0..=60)
        .map(|i| (span / 100.0).ln() + i as f64 * (1000f64).ln() / 60.0)
        .min_by(|a, b| objective(*a).total_cmp(&objective(*b)))
        .unwrap_or(span.ln());

    let opts = SimplexOptions {
        restarts: 1,
        ..Default::default()
    };
    let res = minimize(|x| objective(x[0]), &[seed], &opts);
    let tau = res.x[0].exp();
    let (coef, rss) = solve_linear(times, &y, tau, with_offset)
        .ok_or_else(|| Error::FitFailed("singular design at the optimum".into()))?;
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::FitFailed(format!("nonpositive lifetime {tau}")));
    }
    let amp = coef[0];
    let p = if with_offset { 3 } else { 2 };
    let jac = DMatrix::from_fn(times.len(), p, |i, j| {
        let e = (-times[i] / tau).exp();
        match j {
            0 => e,
            1 => amp * times[i] / (tau * tau) * e,
            _ => 1.0,
        }
    });
    let se = std_errors(&jac, rss, false);
    Ok(ExpDecayFit {
        amplitude: FitParam::new(amp, se[0]),
        tau: FitParam::new(tau, se[1]),
        offset: with_offset.then(|| FitParam::new(coef[1], se[2])),
        residual: rss,
        converged: res.converged,
        iterations: res.iterations,
    })
}
