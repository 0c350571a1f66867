use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lstsq, std_errors, FitParam};
use crate::error::{bad_data, invalid, Error, Result};
use crate::integrate::{GaussianFocus, IntegrationDomain, RateSpectrum};
use crate::model::TrapModel;
use crate::simplex::{minimize, SimplexOptions};

/// Detected fluorescence rate versus time at a fixed beam power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub time_s: Vec<f64>,
    pub counts_per_s: Vec<f64>,
    pub power_w: f64,
}

impl DecayCurve {
    pub fn validate(&self) -> Result<()> {
        if self.time_s.len() != self.counts_per_s.len() {
            return Err(bad_data("time and count columns differ in length"));
        }
        if self.time_s.len() < 2 {
            return Err(bad_data("decay curve needs at least two samples"));
        }
        if self.time_s.windows(2).any(|w| !(w[1] > w[0])) || self.time_s[0] < 0.0 {
            return Err(bad_data(
                "time stamps must be nonnegative and strictly increasing",
            ));
        }
        if self.counts_per_s.iter().any(|v| !v.is_finite()) {
            return Err(bad_data("decay curve contains non-finite counts"));
        }
        if self.counts_per_s.iter().all(|&v| v == 0.0) {
            return Err(bad_data("degenerate decay curve: all counts are zero"));
        }
        if !(self.power_w.is_finite() && self.power_w > 0.0) {
            return Err(invalid(format!(
                "curve power must be > 0, got {}",
                self.power_w
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapFitConfig {
    pub model: TrapModel,
    pub domain: IntegrationDomain,
    /// Log-k bins for the node spectrum; 0 keeps every quadrature node.
    pub compression_bins: usize,
    /// Starting trap rate, 1/s.
    pub gamma_seed: f64,
    pub simplex: SimplexOptions,
}

impl Default for TrapFitConfig {
    fn default() -> Self {
        Self {
            model: TrapModel::tabulated(),
            domain: IntegrationDomain::default(),
            compression_bins: 4096,
            gamma_seed: 1e5,
            simplex: SimplexOptions {
                restarts: 1,
                ..Default::default()
            },
        }
    }
}

/// Shared trap rate and background, one scale per curve (input order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapFitResult {
    pub gamma_trap: FitParam,
    pub background_b: FitParam,
    pub scale_a: Vec<FitParam>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Prepared<'a> {
    curves: &'a [DecayCurve],
    spectra: Vec<RateSpectrum>,
    y: DVector<f64>,
}

impl Prepared<'_> {
    fn model_signals(&self, gamma: f64) -> Vec<Vec<f64>> {
        self.spectra
            .iter()
            .zip(self.curves)
            .map(|(s, c)| s.signal(gamma, &c.time_s))
            .collect()
    }

    fn design(&self, signals: &[Vec<f64>]) -> DMatrix<f64> {
        let m = self.curves.len();
        let rows = self.y.len();
        let mut a = DMatrix::zeros(rows, m + 1);
        let mut row = 0;
        for (i, (c, s)) in self.curves.iter().zip(signals).enumerate() {
            for &v in s {
                a[(row, i)] = v;
                a[(row, m)] = c.power_w;
                row += 1;
            }
        }
        a
    }

    /// Linear (A_i, B) for a given trap rate, with the residual.
    fn solve(&self, gamma: f64) -> Option<(DVector<f64>, f64, DMatrix<f64>)> {
        let signals = self.model_signals(gamma);
        let a = self.design(&signals);
        let coef = lstsq(&a, &self.y)?;
        let rss = (&a * &coef - &self.y).norm_squared();
        Some((coef, rss, a))
    }
}

/// Global least-squares fit of Γ_trap and B with a separate A per curve,
/// minimizing Σ (A_i S_i(t) + B P_i - data)² over all curves and samples.
pub fn fit_trap_model(curves: &[DecayCurve], cfg: &TrapFitConfig) -> Result<TrapFitResult> {
    if curves.is_empty() {
        return Err(bad_data("trap fit needs at least one curve"));
    }
    for c in curves {
        c.validate()?;
    }
    if !(cfg.gamma_seed.is_finite() && cfg.gamma_seed > 0.0) {
        return Err(invalid("gamma seed must be > 0"));
    }
    let spectra = curves
        .par_iter()
        .map(|c| {
            let prof = GaussianFocus::new(&cfg.model, c.power_w)?;
            let s = RateSpectrum::build(&cfg.model, &prof, &cfg.domain)?;
            Ok(if cfg.compression_bins > 0 {
                s.compressed(cfg.compression_bins)
            } else {
                s
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let y = DVector::from_iterator(
        curves.iter().map(|c| c.counts_per_s.len()).sum(),
        curves.iter().flat_map(|c| c.counts_per_s.iter().copied()),
    );
    let prep = Prepared { curves, spectra, y };

    let objective = |x: &[f64]| prep.solve(x[0].exp()).map_or(f64::INFINITY, |r| r.1);
    let res = minimize(objective, &[cfg.gamma_seed.ln()], &cfg.simplex);
    let gamma = res.x[0].exp();
    let (coef, rss, a) = prep
        .solve(gamma)
        .ok_or_else(|| Error::FitFailed("rank-deficient design at the optimum".into()))?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::FitFailed(format!("nonpositive trap rate {gamma}")));
    }

    // Jacobian: d/dΓ by central difference, linear columns exactly
    let m = curves.len();
    let step = 1e-4 * gamma;
    let plus = prep.model_signals(gamma + step);
    let minus = prep.model_signals(gamma - step);
    let mut jac = DMatrix::zeros(a.nrows(), m + 2);
    let mut row = 0;
    for i in 0..m {
        for (p, q) in plus[i].iter().zip(&minus[i]) {
            jac[(row, 0)] = coef[i] * (p - q) / (2.0 * step);
            row += 1;
        }
    }
    jac.columns_mut(1, m + 1).copy_from(&a);
    let se = std_errors(&jac, rss, false);

    Ok(TrapFitResult {
        gamma_trap: FitParam::new(gamma, se[0]),
        background_b: FitParam::new(coef[m], se[m + 1]),
        scale_a: (0..m).map(|i| FitParam::new(coef[i], se[i + 1])).collect(),
        residual: rss,
        converged: res.converged,
        iterations: res.iterations,
        evaluations: res.evaluations,
    })
}
