//! Least-squares fit of `a exp(-t / tau) + c`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 500;
const REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    /// Value of the exponential part at `t = 0`.
    pub amplitude: f64,
    pub decay_time: f64,
    pub offset: f64,
    pub fit_window_start: f64,
    pub residual_rms: f64,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.decay_time).exp() + self.offset
    }
}

fn fail(reason: impl Into<String>, init: [f64; 3]) -> Error {
    Error::FitFailure {
        reason: reason.into(),
        init_amplitude: init[0],
        init_decay_time: init[1],
        init_offset: init[2],
    }
}

/// Deterministic starting point: tail mean for the offset, first value for
/// the amplitude, log-linear regression of the offset-subtracted values for
/// the decay time.
fn initial_guess(t: &[f64], y: &[f64]) -> [f64; 3] {
    let n = t.len();
    let tail = (n / 10).max(1);
    let offset = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let head = (n / 20).max(1);
    let first = y[..head].iter().sum::<f64>() / head as f64;
    let amp_at_start = first - offset;

    // Regress ln|y - c| on t over the part where the signal clearly exceeds
    // the tail level.
    let sign = amp_at_start.signum();
    let floor = 0.05 * amp_at_start.abs();
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (ti, sign * (yi - offset)))
        .filter(|&(_, d)| d > floor)
        .map(|(ti, d)| (ti, d.ln()))
        .collect();
    let span = t[n - 1] - t[0];
    let mut tau = span / 3.0;
    if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let ml = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        if sxx > 0.0 && sxy < 0.0 {
            tau = -sxx / sxy;
        }
    }
    let amplitude = amp_at_start * (t[0] / tau).exp();
    [amplitude, tau, offset]
}

fn sum_sq(t: &[f64], y: &[f64], p: &[f64; 3]) -> f64 {
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = p[0] * (-ti / p[1]).exp() + p[2] - yi;
            r * r
        })
        .sum()
}

/// Fits points with `t >= window_start` by Levenberg-Marquardt.
pub fn fit_exponential(times: &[f64], values: &[f64], window_start: f64) -> Result<ExpFit> {
    if times.len() != values.len() {
        return Err(fail("times and values differ in length", [f64::NAN; 3]));
    }
    let (t, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&ti, _)| ti >= window_start)
        .map(|(&ti, &yi)| (ti, yi))
        .unzip();
    if t.len() < 10 {
        return Err(fail(format!("{} points after window start, need >= 10", t.len()), [f64::NAN; 3]));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite values", [f64::NAN; 3]));
    }
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Err(fail("constant data", [f64::NAN; 3]));
    }

    let init = initial_guess(&t, &y);
    let mut p = init;
    let mut cost = sum_sq(&t, &y, &p);
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (&ti, &yi) in t.iter().zip(&y) {
            let e = (-ti / p[1]).exp();
            let r = p[0] * e + p[2] - yi;
            let j = Vector3::new(e, p[0] * e * ti / (p[1] * p[1]), 1.0);
            jtj += j * j.transpose();
            jtr += j * r;
        }

        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let trial_cost = if trial[1] > 0.0 { sum_sq(&t, &y, &trial) } else { f64::INFINITY };
            if trial_cost <= cost {
                let small = (0..3).all(|k| step[k].abs() <= REL_TOL * p[k].abs().max(1e-12));
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left: at a minimum to working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(fail(format!("no convergence in {MAX_ITERATIONS} iterations"), init));
    }
    if !(p[1] > 0.0) || p.iter().any(|x| !x.is_finite()) {
        return Err(fail(format!("invalid parameters {p:?}"), init));
    }
    Ok(ExpFit {
        amplitude: p[0],
        decay_time: p[1],
        offset: p[2],
        fit_window_start: window_start,
        residual_rms: (cost / t.len() as f64).sqrt(),
    })
}
