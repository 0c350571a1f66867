//! Derivative-free Nelder–Mead simplex minimizer.
//!
//! Coefficients are fixed at reflection 1, expansion 2, contraction 0.5 and
//! shrink 0.5. The initial simplex perturbs each coordinate of `x0` by 5 %
//! (or by 2.5e-4 when the coordinate is zero). Non-finite objective values are
//! treated as +∞.

use serde::{Deserialize, Serialize};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Convergence on simplex size, relative to max(1, |best vertex|).
    pub x_tol: f64,
    /// Convergence on the spread of objective values, relative to
    /// max(|best value|, |value at x0|).
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Additional runs started from the previous optimum with a fresh simplex.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            x_tol: 1e-8,
            f_tol: 1e-12,
            max_iterations: 2000,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], count: &mut usize) -> f64 {
    *count += 1;
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn run<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let n = x0.len();
    let mut evaluations = 0;
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * 1.05 } else { 2.5e-4 };
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(f, v, &mut evaluations)).collect();
    let f_ref = if vals[0].is_finite() {
        vals[0].abs()
    } else {
        0.0
    };

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let best = order[0];
        let worst = order[n];

        let scale = verts[best].iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let size = verts
            .iter()
            .flat_map(|v| v.iter().zip(&verts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        let spread = (vals[worst] - vals[best]).abs();
        let f_scale = vals[best].abs().max(f_ref);
        if n == 0
            || (size <= opts.x_tol * scale && (spread <= opts.f_tol * f_scale || spread == 0.0))
        {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, v) in centroid.iter_mut().zip(&verts[i]) {
                *c += v / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&verts[worst])
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(f, &xr, &mut evaluations);
        let second_worst = vals[order[n - 1]];
        if fr < vals[best] {
            let xe = along(REFLECT * EXPAND);
            let fe = eval(f, &xe, &mut evaluations);
            if fe < fr {
                verts[worst] = xe;
                vals[worst] = fe;
            } else {
                verts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < second_worst {
            verts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[worst] {
            let xc = along(REFLECT * CONTRACT);
            let fc = eval(f, &xc, &mut evaluations);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(f, &xc, &mut evaluations);
            (xc, fc)
        };
        if fc < vals[worst].min(fr) {
            verts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let anchor = verts[best].clone();
        for &i in &order[1..] {
            let v: Vec<f64> = anchor
                .iter()
                .zip(&verts[i])
                .map(|(b, x)| b + SHRINK * (x - b))
                .collect();
            vals[i] = eval(f, &v, &mut evaluations);
            verts[i] = v;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    SimplexResult {
        x: verts[best].clone(),
        value: vals[best],
        iterations,
        evaluations,
        converged,
    }
}

/// Minimize `objective` starting from `x0`. The returned point never has a
/// larger objective than `x0`. Hitting `max_iterations` returns the best
/// vertex with `converged = false`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut objective: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let mut result = run(&mut objective, x0, opts);
    for _ in 0..opts.restarts {
        let again = run(&mut objective, &result.x.clone(), opts);
        let improved = again.value <= result.value;
        let iterations = result.iterations + again.iterations;
        let evaluations = result.evaluations + again.evaluations;
        if improved {
            result = again;
        } else {
            result.converged = again.converged;
        }
        result.iterations = iterations;
        result.evaluations = evaluations;
    }
    result
}
