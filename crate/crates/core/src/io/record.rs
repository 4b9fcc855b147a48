//! Plain-text detection record files, one record per file.
//!
//! ```text
//! # cavity-pqs detection record v1
//! [header]
//! n_max = 25
//! ...                       model keys as in config files
//! seed = 42
//! stream = 0
//! n_samples = 3
//! injection_sample = none   or the resonant sample index
//! emission_probability = none
//! [truth]                   optional
//! initial_n = 12
//! time_seconds,photon_number
//! 0.00123,11
//! [samples]
//! sample_index,phase_index,outcomes
//! 0,0,g
//! 1,1,
//! 2,2,ge
//! ```
//!
//! `outcomes` lists one `g`/`e` per detected atom, empty when none was
//! detected. All atoms of a sample share its phase index. The row of the
//! injection sample is flagged as resonant on reading.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fock::{AtomDetection, Outcome, Sample};
use crate::sim::{DetectionRecord, Injection, TruthTrajectory};

use super::config::{apply_key, split_line, ConfigFile};
use super::fmt_f64;

const MAGIC: &str = "# cavity-pqs detection record v1";

pub fn render_record(record: &DetectionRecord) -> Result<String> {
    let m = &record.model;
    let mut out = String::new();
    let f = fmt_f64;
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "[header]");
    let _ = writeln!(out, "n_max = {}", m.n_max);
    let _ = writeln!(out, "phi0 = {}", f(m.phi0));
    let _ = writeln!(out, "fringe_offset = {}", f(m.fringe_offset));
    let _ = writeln!(out, "fringe_contrast = {}", f(m.fringe_contrast));
    let phases: Vec<String> = m.phases.iter().map(|p| f(*p)).collect();
    let _ = writeln!(out, "phases = {}", phases.join(", "));
    let _ = writeln!(out, "t_sample = {}", f(m.t_sample));
    let _ = writeln!(out, "t_cavity = {}", f(m.t_cavity));
    let _ = writeln!(out, "n_thermal = {}", f(m.n_thermal));
    let _ = writeln!(out, "detection_efficiency = {}", f(m.detection_efficiency));
    let _ = writeln!(out, "mean_atoms_per_sample = {}", f(m.mean_atoms_per_sample));
    let _ = writeln!(out, "seed = {}", record.seed);
    let _ = writeln!(out, "stream = {}", record.stream);
    let _ = writeln!(out, "n_samples = {}", record.samples.len());
    match record.injection {
        Some(inj) => {
            let _ = writeln!(out, "injection_sample = {}", inj.at_sample);
            let _ = writeln!(out, "emission_probability = {}", f(inj.emission_probability));
        }
        None => {
            let _ = writeln!(out, "injection_sample = none");
            let _ = writeln!(out, "emission_probability = none");
        }
    }
    if let Some(truth) = &record.truth {
        let _ = writeln!(out, "[truth]");
        let _ = writeln!(out, "initial_n = {}", truth.initial_n);
        let _ = writeln!(out, "time_seconds,photon_number");
        for (t, n) in truth.jump_times.iter().zip(&truth.photon_numbers) {
            let _ = writeln!(out, "{},{n}", f(*t));
        }
    }
    let _ = writeln!(out, "[samples]");
    let _ = writeln!(out, "sample_index,phase_index,outcomes");
    for (i, s) in record.samples.iter().enumerate() {
        let phase = match s.detections.first() {
            Some(d) => d.phase_index,
            None => m.scheduled_phase(i),
        };
        if s.detections.iter().any(|d| d.phase_index != phase) {
            return Err(Error::Domain(format!("sample {i} mixes phase indices")));
        }
        let outcomes: String = s.detections.iter().map(|d| d.outcome.as_char()).collect();
        let _ = writeln!(out, "{i},{phase},{outcomes}");
    }
    Ok(out)
}

pub fn write_record(path: &Path, record: &DetectionRecord) -> Result<()> {
    super::write_atomic(path, render_record(record)?.as_bytes())
}

#[derive(PartialEq)]
enum Section {
    Preamble,
    Header,
    Truth,
    Samples,
}

pub fn parse_record(text: &str, path: &Path) -> Result<DetectionRecord> {
    let err = |line: usize, msg: String| Error::parse(path, line, msg);
    let mut section = Section::Preamble;
    let mut cfg = ConfigFile::default();
    let mut seed = 0u64;
    let mut stream = 0u64;
    let mut n_samples: Option<usize> = None;
    let mut injection_sample: Option<usize> = None;
    let mut emission: Option<f64> = None;
    let mut truth: Option<TruthTrajectory> = None;
    let mut samples: Vec<Sample> = Vec::new();
    let mut column_header_seen = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        match line {
            "[header]" => {
                section = Section::Header;
                continue;
            }
            "[truth]" => {
                section = Section::Truth;
                truth = Some(TruthTrajectory { initial_n: 0, jump_times: vec![], photon_numbers: vec![] });
                column_header_seen = false;
                continue;
            }
            "[samples]" => {
                section = Section::Samples;
                column_header_seen = false;
                continue;
            }
            _ => {}
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match section {
            Section::Preamble => return Err(err(lineno, "content before [header]".into())),
            Section::Header => {
                let (key, value) = split_line(line)
                    .and_then(|r| r.ok())
                    .ok_or_else(|| err(lineno, "expected 'key = value'".into()))?;
                let parsed = |v: &str| v.parse::<u64>().map_err(|_| err(lineno, format!("{key}: cannot parse '{v}'")));
                match key {
                    "seed" => seed = parsed(value)?,
                    "stream" => stream = parsed(value)?,
                    "n_samples" => n_samples = Some(parsed(value)? as usize),
                    "injection_sample" => {
                        injection_sample = if value == "none" { None } else { Some(parsed(value)? as usize) }
                    }
                    "emission_probability" => {
                        emission = if value == "none" {
                            None
                        } else {
                            Some(value.parse().map_err(|_| err(lineno, format!("{key}: cannot parse '{value}'")))?)
                        }
                    }
                    "initial_state" => {}
                    _ => match apply_key(&mut cfg, key, value) {
                        Ok(true) => {}
                        Ok(false) => return Err(err(lineno, format!("unknown header key '{key}'"))),
                        Err(msg) => return Err(err(lineno, msg)),
                    },
                }
            }
            Section::Truth => {
                let t = truth.as_mut().expect("set on entering [truth]");
                if let Some(v) = line.strip_prefix("initial_n") {
                    let v = v.trim_start().strip_prefix('=').unwrap_or("").trim();
                    t.initial_n = v.parse().map_err(|_| err(lineno, format!("initial_n: cannot parse '{v}'")))?;
                } else if !column_header_seen && line == "time_seconds,photon_number" {
                    column_header_seen = true;
                } else {
                    let (a, b) = line
                        .split_once(',')
                        .ok_or_else(|| err(lineno, "expected 'time_seconds,photon_number'".into()))?;
                    let time: f64 = a.trim().parse().map_err(|_| err(lineno, format!("bad time '{a}'")))?;
                    let n: usize = b.trim().parse().map_err(|_| err(lineno, format!("bad photon number '{b}'")))?;
                    t.jump_times.push(time);
                    t.photon_numbers.push(n);
                }
            }
            Section::Samples => {
                if !column_header_seen && line == "sample_index,phase_index,outcomes" {
                    column_header_seen = true;
                    continue;
                }
                let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
                let [idx, phase, outcomes] = fields.as_slice() else {
                    return Err(err(lineno, format!("expected 3 comma-separated fields, got {}", fields.len())));
                };
                let idx: usize = idx.parse().map_err(|_| err(lineno, format!("bad sample index '{idx}'")))?;
                if idx != samples.len() {
                    return Err(err(lineno, format!("sample index {idx}, expected {}", samples.len())));
                }
                let phase_index: usize = phase.parse().map_err(|_| err(lineno, format!("bad phase index '{phase}'")))?;
                if phase_index >= cfg.model.phases.len() {
                    return Err(err(
                        lineno,
                        format!("phase index {phase_index} outside 0..{}", cfg.model.phases.len()),
                    ));
                }
                let detections = outcomes
                    .chars()
                    .map(|c| {
                        Outcome::from_char(c)
                            .map(|outcome| AtomDetection { outcome, phase_index })
                            .ok_or_else(|| err(lineno, format!("bad outcome '{c}', expected g or e")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                samples.push(Sample { detections, resonant_injection: false });
            }
        }
    }

    let last = text.lines().count().max(1);
    if section != Section::Samples {
        return Err(err(last, "missing [samples] section".into()));
    }
    if let Some(n) = n_samples {
        if n != samples.len() {
            return Err(err(last, format!("header declares {n} samples, found {}", samples.len())));
        }
    }
    cfg.model.validate()?;
    let injection = match injection_sample {
        Some(at) => {
            let s = samples
                .get_mut(at)
                .ok_or_else(|| err(last, format!("injection sample {at} beyond record length")))?;
            s.resonant_injection = true;
            Some(Injection { at_sample: at, emission_probability: emission.unwrap_or(f64::NAN) })
        }
        None => None,
    };
    Ok(DetectionRecord { model: cfg.model, samples, seed, stream, injection, truth })
}

pub fn read_record(path: &Path) -> Result<DetectionRecord> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record(&text, path)
}
