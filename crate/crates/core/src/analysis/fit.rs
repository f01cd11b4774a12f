//! Inverse power-law fit y = a/(x − b)^c + d.
//!
//! For fixed (b, c) the model is linear in (a, d), so the simplex only
//! searches the two nonlinear parameters and solves for a and d in closed
//! form. Data are normalized first; a 3 nm window at ~100 nm is otherwise
//! hopeless for a derivative-free search.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub rms_residual: f64,
    pub converged: bool,
}

impl FitResult {
    pub fn eval(&self, x: f64) -> f64 {
        self.a / (x - self.b).powf(self.c) + self.d
    }
}

/// Minimizer output.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

/// Nelder–Mead simplex with the standard coefficients (1, 2, ½, ½).
/// Stops when every vertex lies within `tol` (relative) of the best one.
pub fn nelder_mead<F>(f: F, start: &[f64], step: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let size = simplex[1..]
            .iter()
            .flat_map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            })
            .fold(0.0, f64::max);
        if size < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |s: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + s * (c - w))
                .collect()
        };

        let xr = along(1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
        history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=n)
        .min_by(|&i, &j| values[i].total_cmp(&values[j]))
        .unwrap_or(0);
    Minimum {
        point: simplex[best].clone(),
        value: values[best],
        iterations,
        converged,
        history,
    }
}

const MAX_ITER: usize = 20_000;
/// Search box: c ∈ (0, 20], min(x) − b ∈ [e⁻¹⁰, e¹⁰] spans. Outside it the
/// family degenerates into an exponential and a, b stop being meaningful.
pub const MAX_EXPONENT: f64 = 20.0;
const MAX_LOG_OFFSET: f64 = 10.0;
const TOL: f64 = 1e-12;

/// Least-squares (a, d) for basis u = (x − b)^−c, plus the squared residual.
fn linear_part(u: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = u.len() as f64;
    let su: f64 = u.iter().sum();
    let sy: f64 = y.iter().sum();
    let suu: f64 = u.iter().map(|v| v * v).sum();
    let suy: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * suu - su * su;
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return None;
    }
    let a = (n * suy - su * sy) / det;
    let d = (sy - a * su) / n;
    let sse: f64 = u
        .iter()
        .zip(y)
        .map(|(ui, yi)| (a * ui + d - yi).powi(2))
        .sum();
    Some((a, d, sse))
}

/// Fits y = a/(x − b)^c + d. Needs at least six strictly monotone x.
pub fn fit_inverse_power(x: &[f64], y: &[f64]) -> Result<FitResult> {
    const OP: &str = "fit_inverse_power";
    if x.len() != y.len() {
        return Err(SimError::Precondition {
            operation: OP,
            reason: format!("x has {} points but y has {}", x.len(), y.len()),
        });
    }
    if x.len() < 6 {
        return Err(SimError::Precondition {
            operation: OP,
            reason: format!("need at least 6 points, got {}", x.len()),
        });
    }
    let increasing = x.windows(2).all(|w| w[1] > w[0]);
    let decreasing = x.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) || x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SimError::Precondition {
            operation: OP,
            reason: "x must be strictly monotone and all values finite".into(),
        });
    }

    // normalize: x' = (x − x_min)/span, y' = (y − ȳ)/σ
    let x_min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let x_max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let y_scale = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(y_scale > 0.0) || !(y_scale > 1e-14 * y_mean.abs()) {
        return Ok(FitResult {
            a: 0.0,
            b: x_min - span,
            c: 1.0,
            d: y_mean,
            rms_residual: 0.0,
            converged: false,
        });
    }
    let xn: Vec<f64> = x.iter().map(|v| (v - x_min) / span).collect();
    let yn: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_scale).collect();

    // p = [ln(−b'), c]; b' < 0 = min x'
    let sse = |p: &[f64]| -> f64 {
        let (lb, c) = (p[0], p[1]);
        if !(c > 0.0 && c <= MAX_EXPONENT) || !(lb.abs() <= MAX_LOG_OFFSET) {
            return f64::INFINITY;
        }
        let b = -lb.exp();
        // scale the basis to O(1) so the normal equations stay well conditioned
        let u0 = (-b).powf(-c);
        let u: Vec<f64> = xn.iter().map(|v| (v - b).powf(-c) / u0).collect();
        match linear_part(&u, &yn) {
            Some((_, _, e)) if e.is_finite() => e,
            _ => f64::INFINITY,
        }
    };

    let mut best: Option<Minimum> = None;
    for c0 in 1..=6 {
        for lb0 in [-1.0f64, 0.5, 2.0] {
            let m = nelder_mead(sse, &[lb0, c0 as f64], &[0.5, 0.5], TOL, MAX_ITER);
            let better = match &best {
                None => true,
                Some(b) => m.value < b.value || (m.value == b.value && m.converged && !b.converged),
            };
            if better && m.value.is_finite() {
                best = Some(m);
            }
        }
    }
    let Some(m) = best else {
        return Ok(FitResult {
            a: 0.0,
            b: x_min - span,
            c: 1.0,
            d: y_mean,
            rms_residual: f64::NAN,
            converged: false,
        });
    };

    let (lb, c) = (m.point[0], m.point[1]);
    let bn = -lb.exp();
    let u0 = (-bn).powf(-c);
    let u: Vec<f64> = xn.iter().map(|v| (v - bn).powf(-c) / u0).collect();
    let (an, dn, _) =
        linear_part(&u, &yn).expect("finite objective implies a solvable linear part");
    // undo the normalization:
    // y = ȳ + σ·an·(−b')^c·(x' − b')^−c + σ·dn, with x' − b' = (x − b)/span
    let b = x_min + span * bn;
    let a = y_scale * an * (x_min - b).powf(c);
    let d = y_mean + y_scale * dn;
    let fit = FitResult {
        a,
        b,
        c,
        d,
        rms_residual: 0.0,
        converged: m.converged,
    };
    let rms = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (fit.eval(*xi) - yi).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitResult {
        rms_residual: rms,
        ..fit
    })
}
