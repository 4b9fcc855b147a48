//! Independent reference computations for the integration tests.
//!
//! Nothing here calls into the estimator or the propagator: transition
//! probabilities and fringe weights are rebuilt from the rate and
//! interference formulas, and posteriors come from summing over every
//! photon-number path.
#![allow(dead_code)]

use cavity_pqs::{AtomDetection, ModelParams, Outcome, Sample};
use rand::Rng;

/// One-step transition matrix `t[to][from]` of the truncated birth-death chain.
pub fn transition_matrix(p: &ModelParams) -> Vec<Vec<f64>> {
    let n_max = p.n_max;
    let kappa = 1.0 / p.t_cavity;
    let mut t = vec![vec![0.0; n_max]; n_max];
    for from in 0..n_max {
        let down = if from > 0 { kappa * (1.0 + p.n_thermal) * from as f64 } else { 0.0 };
        let up = if from + 1 < n_max { kappa * p.n_thermal * (from + 1) as f64 } else { 0.0 };
        if from > 0 {
            t[from - 1][from] = p.t_sample * down;
        }
        if from + 1 < n_max {
            t[from + 1][from] = p.t_sample * up;
        }
        t[from][from] = 1.0 - p.t_sample * (down + up);
    }
    t
}

/// Rate matrix `k[to][from]` of the same chain.
pub fn generator_matrix(p: &ModelParams) -> Vec<Vec<f64>> {
    let n_max = p.n_max;
    let kappa = 1.0 / p.t_cavity;
    let mut k = vec![vec![0.0; n_max]; n_max];
    for from in 0..n_max {
        if from > 0 {
            let r = kappa * (1.0 + p.n_thermal) * from as f64;
            k[from - 1][from] += r;
            k[from][from] -= r;
        }
        if from + 1 < n_max {
            let r = kappa * p.n_thermal * (from + 1) as f64;
            k[from + 1][from] += r;
            k[from][from] -= r;
        }
    }
    k
}

pub fn fringe(p: &ModelParams, outcome: Outcome, phase_index: usize, n: usize) -> f64 {
    let j = match outcome {
        Outcome::G => 1.0,
        Outcome::E => -1.0,
    };
    let phi_n = p.phi0 * (n as f64 + 0.5);
    0.5 * (1.0 + j * p.fringe_offset + j * p.fringe_contrast * (phi_n - p.phi0 / 2.0 - p.phases[phase_index]).sin())
}

pub fn likelihood(p: &ModelParams, sample: &Sample, n: usize) -> f64 {
    if sample.resonant_injection {
        return 1.0;
    }
    sample
        .detections
        .iter()
        .map(|d| fringe(p, d.outcome, d.phase_index, n))
        .product()
}

/// Posterior marginals of `n(t_s)`, `s = 0..=S`, by explicit enumeration of
/// all `n_max^(S+1)` paths. `prior` weights `n_0`, `terminal` weights `n_S`;
/// sample `k` is observed at `n_{k+1}` after one relaxation step.
pub fn path_sum_posteriors(
    p: &ModelParams,
    samples: &[Sample],
    prior: &[f64],
    terminal: &[f64],
) -> Vec<Vec<f64>> {
    let n_max = p.n_max;
    let steps = samples.len();
    let t = transition_matrix(p);
    let like: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| (0..n_max).map(|n| likelihood(p, s, n)).collect())
        .collect();

    let mut marg = vec![vec![0.0; n_max]; steps + 1];
    let mut path = vec![0usize; steps + 1];
    let total_paths = n_max.pow((steps + 1) as u32);
    for code in 0..total_paths {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % n_max;
            c /= n_max;
        }
        let mut w = prior[path[0]] * terminal[path[steps]];
        for k in 0..steps {
            if w == 0.0 {
                break;
            }
            w *= t[path[k + 1]][path[k]] * like[k][path[k + 1]];
        }
        for (s, &n) in path.iter().enumerate() {
            marg[s][n] += w;
        }
    }
    for row in &mut marg {
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= z);
    }
    marg
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// `exp(m t)` by scaling and squaring with a 30-term Taylor series.
pub fn expm(m: &[Vec<f64>], t: f64) -> Vec<Vec<f64>> {
    let n = m.len();
    let norm = m
        .iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = t / 2f64.powi(squarings);
    let a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();

    let mut result: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut term = result.clone();
    for k in 1..=30 {
        term = mat_mul(&term, &a);
        term.iter_mut().flatten().for_each(|x| *x /= k as f64);
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    result
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Random valid model with `n_max` levels and a relaxation step large enough
/// to matter in short records.
pub fn random_params<R: Rng>(rng: &mut R, n_max: usize) -> ModelParams {
    let n_phases = rng.random_range(1..=4);
    let contrast = rng.random_range(0.2..0.9);
    let offset_room: f64 = 1.0 - contrast;
    ModelParams {
        n_max,
        phi0: rng.random_range(0.3..1.2),
        fringe_offset: rng.random_range(-offset_room.min(contrast)..offset_room) * 0.9,
        fringe_contrast: contrast,
        phases: (0..n_phases).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(),
        t_sample: rng.random_range(1e-3..6e-3),
        t_cavity: 0.065,
        n_thermal: rng.random_range(0.0..0.5),
        detection_efficiency: 0.3,
        mean_atoms_per_sample: 1.0,
    }
}

/// Random samples: up to `max_atoms` detections each, random outcomes and
/// phases, occasionally a flagged resonant sample.
pub fn random_samples<R: Rng>(rng: &mut R, p: &ModelParams, len: usize, max_atoms: usize) -> Vec<Sample> {
    (0..len)
        .map(|_| {
            let n = rng.random_range(0..=max_atoms);
            let detections = (0..n)
                .map(|_| AtomDetection {
                    outcome: if rng.random::<bool>() { Outcome::G } else { Outcome::E },
                    phase_index: rng.random_range(0..p.phases.len()),
                })
                .collect();
            Sample { detections, resonant_injection: rng.random::<f64>() < 0.1 }
        })
        .collect()
}

/// Strictly positive random probability vector.
pub fn random_distribution<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

/// e-folding time of `mean(t) - mean(inf)` for a curve sampled at `times`,
/// linearly interpolated.
pub fn efolding_time(times: &[f64], means: &[f64], stationary_mean: f64) -> Option<f64> {
    let excess0 = means[0] - stationary_mean;
    let level = excess0 / std::f64::consts::E;
    for k in 1..times.len() {
        let (a, b) = (means[k - 1] - stationary_mean, means[k] - stationary_mean);
        if a >= level && b < level {
            let f = (a - level) / (a - b);
            return Some(times[k - 1] + f * (times[k] - times[k - 1]));
        }
    }
    None
}
