//! `simulate`, `estimate` and `experiment` commands.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::smooth_uniform;
use crate::experiments::{
    run_experiment1, run_experiment2, Experiment2Options, EXPERIMENT1_REALIZATIONS, EXPERIMENT1_REALIZATIONS_FULL,
    EXPERIMENT2_RUNS, EXPERIMENT2_RUNS_FULL,
};
use crate::fock::FockModel;
use crate::sim::simulate_indexed;

use super::artifacts::{
    render_experiment1_csv, render_experiment2_csv, render_trajectory_csv, write_json, write_text,
    Experiment1Summary, Experiment2Summary, RunManifest,
};
use super::config::{config_hash, load_or_default, Shape};
use super::record::{read_record, write_record};

pub const MANIFEST_FILE: &str = "manifest.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

pub fn record_file_name(index: usize) -> String {
    format!("record_{index:05}.txt")
}

/// Writes `n_records` simulated records and a manifest into `out_dir`.
pub fn cmd_simulate(
    config_path: Option<&PathBuf>,
    out_dir: &Path,
    n_records: usize,
    seed: Option<u64>,
) -> Result<RunManifest> {
    let mut sim = load_or_default(config_path, Shape::Auto)?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    ensure_dir(out_dir)?;
    let records = (0..n_records)
        .into_par_iter()
        .map(|i| simulate_indexed(&sim, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest::new(config_hash(&sim), sim.seed, format!("simulate --records {n_records}"));
    for (i, record) in records.iter().enumerate() {
        let path = out_dir.join(record_file_name(i));
        write_record(&path, record)?;
        manifest.artifact_paths.push(display(&path));
    }
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Smooths one record file into a per-time CSV; the manifest goes next to it
/// as `<out>.manifest.json`.
pub fn cmd_estimate(record_path: &Path, out_path: &Path) -> Result<RunManifest> {
    let bytes = fs::read(record_path).map_err(|e| Error::io(record_path, e))?;
    let record = read_record(record_path)?;
    let model = FockModel::new(record.model.clone())?;
    let traj = smooth_uniform(&model, record.observations())?;
    if let Some(parent) = out_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_text(out_path, &render_trajectory_csv(&traj))?;
    let mut manifest = RunManifest::new(
        hex::encode(Sha256::digest(&bytes)),
        record.seed,
        format!("estimate {}", display(record_path)),
    );
    manifest.artifact_paths.push(display(out_path));
    let mut name = out_path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    manifest.write(&out_path.with_file_name(name))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    One,
    Two,
}

/// Runs an experiment ensemble and writes `experiment{1,2}.csv`, the JSON
/// sidecar and the manifest into `out_dir`.
pub fn cmd_experiment(
    which: Which,
    config_path: Option<&PathBuf>,
    out_dir: &Path,
    n_realizations: Option<usize>,
    seed: Option<u64>,
    full_scale: bool,
) -> Result<RunManifest> {
    let shape = match which {
        Which::One => Shape::Experiment1,
        Which::Two => Shape::Experiment2,
    };
    let mut sim = load_or_default(config_path, shape)?;
    if let Some(s) = seed {
        sim.seed = s;
    }
    ensure_dir(out_dir)?;
    let hash = config_hash(&sim);
    let (stem, csv, json) = match which {
        Which::One => {
            let n = n_realizations.unwrap_or(if full_scale {
                EXPERIMENT1_REALIZATIONS_FULL
            } else {
                EXPERIMENT1_REALIZATIONS
            });
            let res = run_experiment1(&sim, n)?;
            let summary = serde_json::to_value(Experiment1Summary::new(&res, sim.seed, hash.clone()))
                .map_err(|e| Error::Domain(e.to_string()))?;
            ("experiment1", render_experiment1_csv(&res), summary)
        }
        Which::Two => {
            let n = n_realizations.unwrap_or(if full_scale { EXPERIMENT2_RUNS_FULL } else { EXPERIMENT2_RUNS });
            let res = run_experiment2(&sim, n, &Experiment2Options::default())?;
            let summary = serde_json::to_value(Experiment2Summary::new(&res, sim.seed, hash.clone()))
                .map_err(|e| Error::Domain(e.to_string()))?;
            ("experiment2", render_experiment2_csv(&res), summary)
        }
    };
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let json_path = out_dir.join(format!("{stem}.json"));
    write_text(&csv_path, &csv)?;
    write_json(&json_path, &json)?;
    let mut manifest = RunManifest::new(hash, sim.seed, format!("experiment {stem}"));
    manifest.artifact_paths = vec![display(&csv_path), display(&json_path)];
    manifest.write(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Environment variable overriding the worker-thread count.
pub const WORKERS_ENV: &str = "CAVITY_PQS_WORKERS";

/// Sizes the global rayon pool from [`WORKERS_ENV`] when set.
pub fn init_workers_from_env() -> Result<()> {
    let Ok(value) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| {
        Error::Config(crate::error::Violations(vec![crate::error::Violation::new(
            "workers",
            format!("{WORKERS_ENV} must be a positive integer, got '{value}'"),
        )]))
    })?;
    // A pool that already exists keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
