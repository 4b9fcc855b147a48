//! Forward, backward and past-quantum-state (PQS) photon-number estimation.
//!
//! The forward filter propagates the diagonal of `rho` from a prior through
//! `rho_s ∝ M_s T rho_{s-1}`. The backward filter propagates the diagonal of
//! the effect matrix from the final sample through `E_s ∝ T^T M_{s+1} E_{s+1}`.
//! Their normalized entrywise product is the PQS distribution, which equals
//! the posterior marginal of `n(t_s)` given the whole record.
//!
//! Both passes normalize at every step and keep the log of each normalization
//! constant, so records of many thousand samples never underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Direction, FockModel, PhotonDistribution, Sample};

/// Normalized distributions of one filter pass, indexed by `s = 0..=S`.
#[derive(Debug, Clone)]
pub struct FilterPass {
    pub dists: Vec<PhotonDistribution>,
    /// Log normalization increments. Forward: `log_norms[s]` is incurred when
    /// producing `s` from `s - 1` (entry 0 is zero). Backward: `log_norms[s]`
    /// is incurred when producing `s` from `s + 1` (entry `S` is zero).
    pub log_norms: Vec<f64>,
}

fn check_normalized(dist: &PhotonDistribution, n_max: usize, what: &str) -> Result<()> {
    if dist.len() != n_max {
        return Err(Error::Domain(format!(
            "{what} has {} levels, model has {n_max}",
            dist.len()
        )));
    }
    if (dist.total() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("{what} is not normalized (sum {})", dist.total())));
    }
    Ok(())
}

/// Forward distributions `P^rho(n, t_s)` for `s = 0..=S`.
///
/// Each step applies relaxation first, then the measurement of sample `s`.
pub fn forward_filter(
    model: &FockModel,
    samples: &[Sample],
    prior: &PhotonDistribution,
) -> Result<FilterPass> {
    check_normalized(prior, model.n_max(), "prior")?;
    model.check_samples(samples)?;

    let mut dists = Vec::with_capacity(samples.len() + 1);
    let mut log_norms = Vec::with_capacity(samples.len() + 1);
    dists.push(prior.clone());
    log_norms.push(0.0);

    let mut current = prior.probs().to_vec();
    let mut next = vec![0.0; current.len()];
    for (i, sample) in samples.iter().enumerate() {
        model.propagator().apply(&current, &mut next, Direction::Forward);
        model.apply_measurement(sample, &mut next);
        let norm: f64 = next.iter().sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InconsistentRecord { sample: i });
        }
        next.iter_mut().for_each(|p| *p /= norm);
        std::mem::swap(&mut current, &mut next);
        dists.push(PhotonDistribution::from_probs(current.clone())?);
        log_norms.push(norm.ln());
    }
    Ok(FilterPass { dists, log_norms })
}

/// Backward (effect) distributions `P^E(n, t_s)` for `s = 0..=S`, starting
/// from `terminal` at `s = S`.
///
/// Each step measures sample `s + 1` first, then applies adjoint relaxation.
pub fn backward_filter(
    model: &FockModel,
    samples: &[Sample],
    terminal: &PhotonDistribution,
) -> Result<FilterPass> {
    check_normalized(terminal, model.n_max(), "terminal")?;
    model.check_samples(samples)?;

    let s_total = samples.len();
    let mut dists = vec![terminal.clone(); s_total + 1];
    let mut log_norms = vec![0.0; s_total + 1];

    let mut current = terminal.probs().to_vec();
    let mut next = vec![0.0; current.len()];
    for (i, sample) in samples.iter().enumerate().rev() {
        model.apply_measurement(sample, &mut current);
        model.propagator().apply(&current, &mut next, Direction::Backward);
        let norm: f64 = next.iter().sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InconsistentRecord { sample: i });
        }
        next.iter_mut().for_each(|p| *p /= norm);
        std::mem::swap(&mut current, &mut next);
        dists[i] = PhotonDistribution::from_probs(current.clone())?;
        log_norms[i] = norm.ln();
    }
    Ok(FilterPass { dists, log_norms })
}

/// Normalized entrywise product of forward and backward distributions.
pub fn combine_pqs(
    forward: &PhotonDistribution,
    backward: &PhotonDistribution,
) -> Result<PhotonDistribution> {
    if forward.len() != backward.len() {
        return Err(Error::Domain(format!(
            "forward has {} levels, backward has {}",
            forward.len(),
            backward.len()
        )));
    }
    let product: Vec<f64> = forward
        .probs()
        .iter()
        .zip(backward.probs())
        .map(|(f, b)| f * b)
        .collect();
    let mut out = PhotonDistribution::from_probs(product)?;
    if !(out.normalize() > 0.0) {
        return Err(Error::DisjointSupport);
    }
    Ok(out)
}

/// Forward, backward and PQS distributions of one record.
#[derive(Debug, Clone)]
pub struct SmoothedTrajectory {
    /// `t_s = s T_a` for `s = 0..=S`.
    pub times: Vec<f64>,
    pub forward: Vec<PhotonDistribution>,
    pub backward: Vec<PhotonDistribution>,
    pub pqs: Vec<PhotonDistribution>,
    pub log_norms_forward: Vec<f64>,
    pub log_norms_backward: Vec<f64>,
}

impl SmoothedTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Log of `sum_n rho~_n(t_s) E~_n(t_s)` for the unnormalized forward and
    /// backward vectors. Independent of `s`: it is the record log-likelihood
    /// (up to the constant scale of the terminal vector).
    pub fn log_likelihood_at(&self, s: usize) -> f64 {
        let overlap: f64 = self.forward[s]
            .probs()
            .iter()
            .zip(self.backward[s].probs())
            .map(|(f, b)| f * b)
            .sum();
        let past: f64 = self.log_norms_forward[..=s].iter().sum();
        let future: f64 = self.log_norms_backward[s..].iter().sum();
        overlap.ln() + past + future
    }
}

/// Runs both filters and combines them.
pub fn smooth(
    model: &FockModel,
    samples: &[Sample],
    prior: &PhotonDistribution,
    terminal: &PhotonDistribution,
) -> Result<SmoothedTrajectory> {
    let fwd = forward_filter(model, samples, prior)?;
    let bwd = backward_filter(model, samples, terminal)?;
    let pqs = fwd
        .dists
        .iter()
        .zip(&bwd.dists)
        .map(|(f, b)| combine_pqs(f, b))
        .collect::<Result<Vec<_>>>()?;
    let t_sample = model.params().t_sample;
    Ok(SmoothedTrajectory {
        times: (0..=samples.len()).map(|s| s as f64 * t_sample).collect(),
        forward: fwd.dists,
        backward: bwd.dists,
        pqs,
        log_norms_forward: fwd.log_norms,
        log_norms_backward: bwd.log_norms,
    })
}

/// [`smooth`] with uniform prior and uniform terminal vector.
pub fn smooth_uniform(model: &FockModel, samples: &[Sample]) -> Result<SmoothedTrajectory> {
    let uniform = PhotonDistribution::uniform(model.n_max());
    smooth(model, samples, &uniform, &uniform)
}

/// Per-time mean, standard deviation and most likely photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummarySeries {
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub std_n: Vec<f64>,
    pub map_n: Vec<usize>,
    pub map_prob: Vec<f64>,
}

pub fn summarize(times: &[f64], dists: &[PhotonDistribution]) -> SummarySeries {
    let mut out = SummarySeries {
        times: times.to_vec(),
        mean_n: Vec::with_capacity(dists.len()),
        std_n: Vec::with_capacity(dists.len()),
        map_n: Vec::with_capacity(dists.len()),
        map_prob: Vec::with_capacity(dists.len()),
    };
    for d in dists {
        let map = d.argmax();
        out.mean_n.push(d.mean());
        out.std_n.push(d.std_dev());
        out.map_n.push(map);
        out.map_prob.push(d.probs()[map]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
}

/// First time the mean photon number crosses `threshold` in `direction`,
/// linearly interpolated between the bracketing samples.
pub fn jump_time(series: &SummarySeries, threshold: f64, direction: Crossing) -> Option<f64> {
    crossing_in(&series.times, &series.mean_n, threshold, direction, f64::NEG_INFINITY, f64::INFINITY)
}

/// As [`jump_time`], restricted to bracketing samples inside `[from, to]`.
pub fn jump_time_within(
    series: &SummarySeries,
    threshold: f64,
    direction: Crossing,
    from: f64,
    to: f64,
) -> Option<f64> {
    crossing_in(&series.times, &series.mean_n, threshold, direction, from, to)
}

pub(crate) fn crossing_in(
    times: &[f64],
    values: &[f64],
    threshold: f64,
    direction: Crossing,
    from: f64,
    to: f64,
) -> Option<f64> {
    let start = times.partition_point(|&t| t < from);
    let end = times.partition_point(|&t| t <= to);
    if end <= start + 1 {
        return None;
    }
    for k in start..end - 1 {
        let (a, b) = (values[k], values[k + 1]);
        let crosses = match direction {
            Crossing::Rising => a < threshold && b >= threshold,
            Crossing::Falling => a > threshold && b <= threshold,
        };
        if crosses {
            let frac = (threshold - a) / (b - a);
            return Some(times[k] + frac * (times[k + 1] - times[k]));
        }
    }
    None
}

/// Number of consecutive-time MAP changes of at least `min_step` photons.
pub fn count_map_jumps(series: &SummarySeries, min_step: usize) -> usize {
    series
        .map_n
        .windows(2)
        .filter(|w| w[0].abs_diff(w[1]) >= min_step)
        .count()
}
