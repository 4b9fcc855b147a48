//! CSV and JSON outputs plus the run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{summarize, SmoothedTrajectory};
use crate::experiments::{EnsembleResult, Experiment2Result, JumpStats, RealizationFailure};

use super::{fmt_f64, write_atomic};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub root_seed: u64,
    pub command: String,
    pub artifact_paths: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config_hash: String, root_seed: u64, command: impl Into<String>) -> Self {
        Self {
            config_hash,
            root_seed,
            command: command.into(),
            artifact_paths: Vec::new(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

/// Per-time distributions and summaries of one smoothed record.
pub fn render_trajectory_csv(traj: &SmoothedTrajectory) -> String {
    let n_max = traj.forward.first().map_or(0, |d| d.len());
    let mut out = String::with_capacity(traj.len() * (3 * n_max + 10) * 20);
    let mut header = vec!["t".to_string()];
    for tag in ["fwd", "bwd", "pqs"] {
        header.extend((0..n_max).map(|n| format!("p_{tag}_{n}")));
    }
    for tag in ["fwd", "bwd", "pqs"] {
        header.extend([format!("mean_{tag}"), format!("std_{tag}"), format!("map_{tag}")]);
    }
    row(&mut out, header);

    let summaries = [&traj.forward, &traj.backward, &traj.pqs].map(|d| summarize(&traj.times, d));
    for s in 0..traj.len() {
        let mut cells = vec![fmt_f64(traj.times[s])];
        for dists in [&traj.forward, &traj.backward, &traj.pqs] {
            cells.extend(dists[s].probs().iter().map(|p| fmt_f64(*p)));
        }
        for sum in &summaries {
            cells.push(fmt_f64(sum.mean_n[s]));
            cells.push(fmt_f64(sum.std_n[s]));
            cells.push(sum.map_n[s].to_string());
        }
        row(&mut out, cells);
    }
    out
}

pub fn render_experiment1_csv(res: &EnsembleResult) -> String {
    let mut out = String::new();
    row(&mut out, ["t_seconds", "sigma_fwd", "sigma_bwd", "sigma_pqs"].map(String::from));
    for s in 0..res.times.len() {
        row(
            &mut out,
            [res.times[s], res.avg_std_forward[s], res.avg_std_backward[s], res.avg_std_pqs[s]].map(fmt_f64),
        );
    }
    out
}

pub fn render_experiment2_csv(res: &Experiment2Result) -> String {
    let e = &res.ensemble;
    let mut out = String::new();
    row(&mut out, ["t_seconds", "mean_fwd", "mean_bwd", "mean_pqs", "fit_value"].map(String::from));
    for s in 0..e.times.len() {
        let t = e.times[s];
        let fit = match &res.fit {
            Some(f) if t >= 0.0 => fmt_f64(f.eval(t)),
            _ => String::new(),
        };
        let [a, b, c, d] = [t, e.avg_mean_forward[s], e.avg_mean_backward[s], e.avg_mean_pqs[s]].map(fmt_f64);
        row(&mut out, [a, b, c, d, fit]);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Experiment1Summary {
    pub experiment: u8,
    pub root_seed: u64,
    pub config_hash: String,
    pub n_realizations: usize,
    pub n_samples: usize,
    pub sigma_fwd_start: f64,
    pub sigma_bwd_start: f64,
    pub sigma_pqs_start: f64,
    pub sigma_fwd_end: f64,
    pub sigma_bwd_end: f64,
    pub sigma_pqs_end: f64,
    pub large_map_jumps_fwd_total: usize,
    pub large_map_jumps_bwd_total: usize,
    pub large_map_jumps_pqs_total: usize,
    pub failures: Vec<RealizationFailure>,
}

impl Experiment1Summary {
    pub fn new(res: &EnsembleResult, root_seed: u64, config_hash: String) -> Self {
        let last = res.times.len().saturating_sub(1);
        Self {
            experiment: 1,
            root_seed,
            config_hash,
            n_realizations: res.n_realizations,
            n_samples: last,
            sigma_fwd_start: res.avg_std_forward[0],
            sigma_bwd_start: res.avg_std_backward[0],
            sigma_pqs_start: res.avg_std_pqs[0],
            sigma_fwd_end: res.avg_std_forward[last],
            sigma_bwd_end: res.avg_std_backward[last],
            sigma_pqs_end: res.avg_std_pqs[last],
            large_map_jumps_fwd_total: res.large_map_jumps_forward.iter().sum(),
            large_map_jumps_bwd_total: res.large_map_jumps_backward.iter().sum(),
            large_map_jumps_pqs_total: res.large_map_jumps_pqs.iter().sum(),
            failures: res.failures.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Experiment2Summary {
    pub experiment: u8,
    pub root_seed: u64,
    pub config_hash: String,
    pub n_runs: usize,
    pub n_selected: usize,
    pub selection_fraction: f64,
    pub emission_probability: f64,
    pub predicted_amplitude: f64,
    pub fit_amplitude: Option<f64>,
    pub fit_decay_time: Option<f64>,
    pub fit_offset: Option<f64>,
    pub fit_window_start: f64,
    pub fit_residual_rms: Option<f64>,
    pub fit_error: Option<String>,
    pub jump_threshold: f64,
    pub jump_window: (f64, f64),
    pub jump_time_mean_pqs: f64,
    pub jump_time_std_pqs: f64,
    pub jump_time_mean_fwd: f64,
    pub jump_time_std_fwd: f64,
    pub jump_time_mean_bwd: f64,
    pub jump_time_std_bwd: f64,
    pub jump_stats_pqs: JumpStats,
    pub jump_stats_fwd: JumpStats,
    pub jump_stats_bwd: JumpStats,
    pub avg_curve_crossing_pqs: Option<f64>,
    pub avg_curve_crossing_fwd: Option<f64>,
    pub avg_curve_crossing_bwd: Option<f64>,
    pub failures: Vec<RealizationFailure>,
}

impl Experiment2Summary {
    pub fn new(res: &Experiment2Result, root_seed: u64, config_hash: String) -> Self {
        Self {
            experiment: 2,
            root_seed,
            config_hash,
            n_runs: res.n_runs,
            n_selected: res.n_selected,
            selection_fraction: res.selection_fraction,
            emission_probability: res.emission_probability,
            predicted_amplitude: res.predicted_amplitude,
            fit_amplitude: res.fit.map(|f| f.amplitude),
            fit_decay_time: res.fit.map(|f| f.decay_time),
            fit_offset: res.fit.map(|f| f.offset),
            fit_window_start: res.options.fit_window_start,
            fit_residual_rms: res.fit.map(|f| f.residual_rms),
            fit_error: res.fit_error.clone(),
            jump_threshold: res.options.threshold,
            jump_window: res.options.jump_window,
            jump_time_mean_pqs: res.jump_stats_pqs.mean,
            jump_time_std_pqs: res.jump_stats_pqs.std,
            jump_time_mean_fwd: res.jump_stats_forward.mean,
            jump_time_std_fwd: res.jump_stats_forward.std,
            jump_time_mean_bwd: res.jump_stats_backward.mean,
            jump_time_std_bwd: res.jump_stats_backward.std,
            jump_stats_pqs: res.jump_stats_pqs.clone(),
            jump_stats_fwd: res.jump_stats_forward.clone(),
            jump_stats_bwd: res.jump_stats_backward.clone(),
            avg_curve_crossing_pqs: res.avg_curve_crossing_pqs,
            avg_curve_crossing_fwd: res.avg_curve_crossing_forward,
            avg_curve_crossing_bwd: res.avg_curve_crossing_backward,
            failures: res.ensemble.failures.clone(),
        }
    }
}

/// Reads back a CSV written by this module: header plus numeric rows (empty
/// cells become NaN).
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(String::from).collect())
        .unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| if c.is_empty() { f64::NAN } else { c.parse().unwrap_or(f64::NAN) })
                .collect()
        })
        .collect();
    (header, rows)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}
