//! Ensemble runs of the two photon-counting experiments.
//!
//! Experiment 1 decays a coherent field to vacuum and compares the average
//! widths of the forward, backward and PQS distributions. Experiment 2 injects
//! photons with one resonant sample, post-selects runs with a single `g`
//! detection there, and measures how precisely each analysis locates the jump.
//!
//! Realizations run on the rayon pool. Each uses its own seeded stream and
//! results are reduced in fixed-size chunks in index order, so the output is
//! identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    count_map_jumps, crossing_in, jump_time_within, smooth_uniform, summarize, Crossing, SummarySeries,
};
use crate::fit::{fit_exponential, ExpFit};
use crate::fock::FockModel;
use crate::sim::{is_single_g, predicted_injected_photons, simulate_indexed, InitialState, SimConfig};

const CHUNK: usize = 8;

/// Minimum MAP step counted as an ambiguity jump (the meter period).
pub const AMBIGUITY_STEP: usize = 8;

/// Default ensemble sizes.
pub const EXPERIMENT1_REALIZATIONS: usize = 500;
pub const EXPERIMENT2_RUNS: usize = 4000;
/// Ensemble sizes of the laboratory runs.
pub const EXPERIMENT1_REALIZATIONS_FULL: usize = 6000;
pub const EXPERIMENT2_RUNS_FULL: usize = 16320;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationFailure {
    pub index: u64,
    pub error: String,
}

/// Per-time ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// Grid times; for experiment 2 relative to the injection sample.
    pub times: Vec<f64>,
    pub avg_std_forward: Vec<f64>,
    pub avg_std_backward: Vec<f64>,
    pub avg_std_pqs: Vec<f64>,
    /// Standard errors of the three averaged widths.
    pub sem_std_forward: Vec<f64>,
    pub sem_std_backward: Vec<f64>,
    pub sem_std_pqs: Vec<f64>,
    /// Standard errors of the paired differences `sigma[P] - sigma[P^rho]`
    /// and `sigma[P] - sigma[P^E]`.
    pub sem_diff_pqs_forward: Vec<f64>,
    pub sem_diff_pqs_backward: Vec<f64>,
    pub avg_mean_forward: Vec<f64>,
    pub avg_mean_backward: Vec<f64>,
    pub avg_mean_pqs: Vec<f64>,
    /// Per-realization jump times (experiment 2), only where a crossing exists.
    pub jump_times_forward: Vec<f64>,
    pub jump_times_backward: Vec<f64>,
    pub jump_times_pqs: Vec<f64>,
    /// Per-realization count of MAP changes by at least [`AMBIGUITY_STEP`].
    pub large_map_jumps_forward: Vec<usize>,
    pub large_map_jumps_backward: Vec<usize>,
    pub large_map_jumps_pqs: Vec<usize>,
    /// Realizations contributing to the averages.
    pub n_realizations: usize,
    pub failures: Vec<RealizationFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl JumpStats {
    pub fn from_times(times: &[f64]) -> Self {
        let count = times.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, std: f64::NAN };
        }
        let mean = times.iter().sum::<f64>() / count as f64;
        let var = if count > 1 {
            times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Self { count, mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Options {
    pub threshold: f64,
    /// Jump search window relative to the injection time, seconds.
    pub jump_window: (f64, f64),
    /// Start of the exponential fit relative to the injection time.
    pub fit_window_start: f64,
}

impl Default for Experiment2Options {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            jump_window: (-0.02, 0.06),
            fit_window_start: 0.035,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment2Result {
    pub ensemble: EnsembleResult,
    pub n_runs: usize,
    pub n_selected: usize,
    pub selection_fraction: f64,
    pub emission_probability: f64,
    /// Expected injected photons among selected runs under the Poisson model.
    pub predicted_amplitude: f64,
    pub options: Experiment2Options,
    pub fit: Option<ExpFit>,
    pub fit_error: Option<String>,
    pub jump_stats_forward: JumpStats,
    pub jump_stats_backward: JumpStats,
    pub jump_stats_pqs: JumpStats,
    /// Threshold crossings of the ensemble-averaged mean curves.
    pub avg_curve_crossing_forward: Option<f64>,
    pub avg_curve_crossing_backward: Option<f64>,
    pub avg_curve_crossing_pqs: Option<f64>,
}

#[derive(Debug, Clone, Default)]
struct Moments {
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl Moments {
    fn add(&mut self, x: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; x.len()];
            self.sumsq = vec![0.0; x.len()];
        }
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sumsq).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.sum.is_empty() {
            return;
        }
        if self.sum.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&other.sumsq) {
            *a += b;
        }
    }

    fn mean(&self, n: usize, len: usize) -> Vec<f64> {
        if n == 0 {
            return vec![f64::NAN; len];
        }
        self.sum.iter().map(|s| s / n as f64).collect()
    }

    fn sem(&self, n: usize, len: usize) -> Vec<f64> {
        if n < 2 {
            return vec![f64::NAN; len];
        }
        let nf = n as f64;
        self.sum
            .iter()
            .zip(&self.sumsq)
            .map(|(s, q)| {
                let m = s / nf;
                let var = ((q - nf * m * m) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            })
            .collect()
    }
}

struct Triplet {
    forward: SummarySeries,
    backward: SummarySeries,
    pqs: SummarySeries,
}

#[derive(Default)]
struct Partial {
    count: usize,
    std: [Moments; 3],
    mean: [Moments; 3],
    diff: [Moments; 2],
    jumps: [Vec<f64>; 3],
    map_jumps: [Vec<usize>; 3],
    failures: Vec<RealizationFailure>,
    considered: usize,
}

impl Partial {
    fn add(&mut self, t: &Triplet, jumps: Option<[Option<f64>; 3]>) {
        self.count += 1;
        let all = [&t.forward, &t.backward, &t.pqs];
        for (k, s) in all.iter().enumerate() {
            self.std[k].add(&s.std_n);
            self.mean[k].add(&s.mean_n);
            self.map_jumps[k].push(count_map_jumps(s, AMBIGUITY_STEP));
        }
        for (k, other) in [&t.forward, &t.backward].iter().enumerate() {
            let d: Vec<f64> = t.pqs.std_n.iter().zip(&other.std_n).map(|(p, o)| p - o).collect();
            self.diff[k].add(&d);
        }
        if let Some(js) = jumps {
            for (k, j) in js.into_iter().enumerate() {
                if let Some(j) = j {
                    self.jumps[k].push(j);
                }
            }
        }
    }

    fn merge(&mut self, other: Partial) {
        self.count += other.count;
        self.considered += other.considered;
        for k in 0..3 {
            self.std[k].merge(&other.std[k]);
            self.mean[k].merge(&other.mean[k]);
            self.jumps[k].extend_from_slice(&other.jumps[k]);
            self.map_jumps[k].extend_from_slice(&other.map_jumps[k]);
        }
        for k in 0..2 {
            self.diff[k].merge(&other.diff[k]);
        }
        self.failures.extend(other.failures);
    }

    fn finish(self, times: Vec<f64>) -> EnsembleResult {
        let n = self.count;
        let len = times.len();
        let [jf, jb, jp] = self.jumps;
        let [mf, mb, mp] = self.map_jumps;
        EnsembleResult {
            avg_std_forward: self.std[0].mean(n, len),
            avg_std_backward: self.std[1].mean(n, len),
            avg_std_pqs: self.std[2].mean(n, len),
            sem_std_forward: self.std[0].sem(n, len),
            sem_std_backward: self.std[1].sem(n, len),
            sem_std_pqs: self.std[2].sem(n, len),
            sem_diff_pqs_forward: self.diff[0].sem(n, len),
            sem_diff_pqs_backward: self.diff[1].sem(n, len),
            avg_mean_forward: self.mean[0].mean(n, len),
            avg_mean_backward: self.mean[1].mean(n, len),
            avg_mean_pqs: self.mean[2].mean(n, len),
            jump_times_forward: jf,
            jump_times_backward: jb,
            jump_times_pqs: jp,
            large_map_jumps_forward: mf,
            large_map_jumps_backward: mb,
            large_map_jumps_pqs: mp,
            n_realizations: n,
            failures: self.failures,
            times,
        }
    }
}

enum Realization {
    Skipped,
    Done(Triplet, Option<[Option<f64>; 3]>),
}

fn analyse(model: &FockModel, record: &crate::sim::DetectionRecord) -> Result<Triplet> {
    let smoothed = smooth_uniform(model, record.observations())?;
    Ok(Triplet {
        forward: summarize(&smoothed.times, &smoothed.forward),
        backward: summarize(&smoothed.times, &smoothed.backward),
        pqs: summarize(&smoothed.times, &smoothed.pqs),
    })
}

fn run_ensemble<F>(n_runs: usize, times: Vec<f64>, per_run: F) -> EnsembleResult
where
    F: Fn(u64) -> Result<Realization> + Sync,
{
    let chunks: Vec<std::ops::Range<usize>> = (0..n_runs)
        .step_by(CHUNK)
        .map(|start| start..(start + CHUNK).min(n_runs))
        .collect();
    let partials: Vec<Partial> = chunks
        .into_par_iter()
        .map(|range| {
            let mut p = Partial::default();
            for i in range {
                p.considered += 1;
                match per_run(i as u64) {
                    Ok(Realization::Skipped) => {}
                    Ok(Realization::Done(t, j)) => p.add(&t, j),
                    Err(e) => p.failures.push(RealizationFailure { index: i as u64, error: e.to_string() }),
                }
            }
            p
        })
        .collect();
    let mut total = Partial::default();
    for p in partials {
        total.merge(p);
    }
    total.finish(times)
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg.to_string()))
    }
}

/// Ensemble of coherent-state decays analysed with a uniform prior.
pub fn run_experiment1(config: &SimConfig, n_realizations: usize) -> Result<EnsembleResult> {
    config.validate()?;
    require(config.injection.is_none(), "experiment 1 takes no injection")?;
    require(
        matches!(config.initial_state, InitialState::Coherent { .. }),
        "experiment 1 starts from a coherent state",
    )?;
    let model = FockModel::new(config.model.clone())?;
    let times: Vec<f64> = (0..=config.n_samples).map(|s| s as f64 * config.model.t_sample).collect();
    Ok(run_ensemble(n_realizations, times, |i| {
        let record = simulate_indexed(config, i)?;
        Ok(Realization::Done(analyse(&model, &record)?, None))
    }))
}

/// Photon-injection ensemble with single-`g` post-selection.
pub fn run_experiment2(
    config: &SimConfig,
    n_runs: usize,
    options: &Experiment2Options,
) -> Result<Experiment2Result> {
    config.validate()?;
    let injection = config
        .injection
        .ok_or_else(|| Error::Domain("experiment 2 needs an injection sample".into()))?;
    let model = FockModel::new(config.model.clone())?;
    let t_inj = config.sample_time(injection.at_sample);
    let times: Vec<f64> = (0..=config.n_samples)
        .map(|s| s as f64 * config.model.t_sample - t_inj)
        .collect();
    let (from, to) = options.jump_window;

    let ensemble = run_ensemble(n_runs, times.clone(), |i| {
        let record = simulate_indexed(config, i)?;
        if !is_single_g(&record.samples[injection.at_sample]) {
            return Ok(Realization::Skipped);
        }
        let mut t = analyse(&model, &record)?;
        for s in [&mut t.forward, &mut t.backward, &mut t.pqs] {
            s.times.clone_from(&times);
        }
        let jumps = [&t.forward, &t.backward, &t.pqs]
            .map(|s| jump_time_within(s, options.threshold, Crossing::Rising, from, to));
        Ok(Realization::Done(t, Some(jumps)))
    });

    let n_selected = ensemble.n_realizations;
    let (fit, fit_error) = if n_selected > 0 {
        match fit_exponential(&ensemble.times, &ensemble.avg_mean_pqs, options.fit_window_start) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, Some("no selected realizations".to_string()))
    };
    let crossing = |curve: &[f64]| {
        if n_selected == 0 {
            return None;
        }
        crossing_in(&ensemble.times, curve, options.threshold, Crossing::Rising, from, to)
    };
    let considered = n_runs - ensemble.failures.len();
    Ok(Experiment2Result {
        n_runs,
        n_selected,
        selection_fraction: if considered > 0 { n_selected as f64 / considered as f64 } else { f64::NAN },
        emission_probability: injection.emission_probability,
        predicted_amplitude: predicted_injected_photons(&config.model, injection.emission_probability),
        options: options.clone(),
        fit,
        fit_error,
        jump_stats_forward: JumpStats::from_times(&ensemble.jump_times_forward),
        jump_stats_backward: JumpStats::from_times(&ensemble.jump_times_backward),
        jump_stats_pqs: JumpStats::from_times(&ensemble.jump_times_pqs),
        avg_curve_crossing_forward: crossing(&ensemble.avg_mean_forward),
        avg_curve_crossing_backward: crossing(&ensemble.avg_mean_backward),
        avg_curve_crossing_pqs: crossing(&ensemble.avg_mean_pqs),
        ensemble,
    })
}
