//! Flat `key = value` configuration files.
//!
//! Keys mirror [`ModelParams`] and [`SimConfig`] in SI units; `#` starts a
//! comment. Every key is optional and falls back to the default model and the
//! experiment shape implied by the file (an `injection_sample` key selects the
//! photon-injection shape). Angles accept plain radians or multiples of `pi`
//! such as `pi/4` and `3pi/4`.
//!
//! ```text
//! n_max = 25
//! phi0 = pi/4
//! phases = 0, pi/4, pi/2, 3pi/4
//! t_sample = 86e-6
//! initial_state = coherent 12
//! n_samples = 7000
//! injection_sample = none
//! emission_probability = calibrate
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation, Violations};
use crate::fock::ModelParams;
use crate::sim::{calibrate_emission_probability, InitialState, Injection, SimConfig, SINGLE_G_SELECTION_FRACTION};

pub const KEYS: &[&str] = &[
    "n_max",
    "phi0",
    "fringe_offset",
    "fringe_contrast",
    "phases",
    "t_sample",
    "t_cavity",
    "n_thermal",
    "detection_efficiency",
    "mean_atoms_per_sample",
    "initial_state",
    "n_samples",
    "injection_sample",
    "emission_probability",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionSetting {
    Calibrate,
    Fixed(f64),
}

/// Parsed file contents before defaults are applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub model: ModelParams,
    pub initial_state: Option<InitialState>,
    pub n_samples: Option<usize>,
    /// `Some(None)` for an explicit `none`.
    pub injection_sample: Option<Option<usize>>,
    pub emission_probability: Option<EmissionSetting>,
    pub seed: Option<u64>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            model: ModelParams::default(),
            initial_state: None,
            n_samples: None,
            injection_sample: None,
            emission_probability: None,
            seed: None,
        }
    }
}

/// Which experiment shape supplies the defaults for unspecified keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Auto,
    Experiment1,
    Experiment2,
}

pub fn parse_angle(s: &str) -> Option<f64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(x) = s.parse::<f64>() {
        return Some(x);
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), d.parse::<f64>().ok()?),
        None => (s.clone(), 1.0),
    };
    let coeff = num.strip_suffix("pi")?;
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
    let k = match coeff {
        "" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().ok()?,
    };
    Some(k * std::f64::consts::PI / den)
}

fn parse_initial_state(v: &str) -> Option<InitialState> {
    let mut parts = v.split_whitespace();
    let kind = parts.next()?;
    let arg = parts.next();
    if parts.next().is_some() {
        return None;
    }
    match (kind, arg) {
        ("thermal", None) => Some(InitialState::Thermal),
        ("coherent", Some(m)) => m.parse().ok().map(|mean| InitialState::Coherent { mean }),
        ("fock", Some(n)) => n.parse().ok().map(|n| InitialState::Fock { n }),
        _ => None,
    }
}

pub fn format_initial_state(s: &InitialState) -> String {
    match s {
        InitialState::Thermal => "thermal".into(),
        InitialState::Coherent { mean } => format!("coherent {}", super::fmt_f64(*mean)),
        InitialState::Fock { n } => format!("fock {n}"),
    }
}

/// Applies one `key = value` pair. `Ok(false)` for an unknown key.
pub(crate) fn apply_key(cfg: &mut ConfigFile, key: &str, value: &str) -> std::result::Result<bool, String> {
    fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
        v.parse().map_err(|_| format!("{key}: cannot parse '{v}'"))
    }
    let angle = |v: &str| parse_angle(v).ok_or_else(|| format!("{key}: cannot parse angle '{v}'"));
    let m = &mut cfg.model;
    match key {
        "n_max" => m.n_max = num(key, value)?,
        "phi0" => m.phi0 = angle(value)?,
        "fringe_offset" => m.fringe_offset = num(key, value)?,
        "fringe_contrast" => m.fringe_contrast = num(key, value)?,
        "phases" => {
            m.phases = if value.is_empty() {
                Vec::new()
            } else {
                value.split(',').map(|p| angle(p.trim())).collect::<std::result::Result<_, _>>()?
            }
        }
        "t_sample" => m.t_sample = num(key, value)?,
        "t_cavity" => m.t_cavity = num(key, value)?,
        "n_thermal" => m.n_thermal = num(key, value)?,
        "detection_efficiency" => m.detection_efficiency = num(key, value)?,
        "mean_atoms_per_sample" => m.mean_atoms_per_sample = num(key, value)?,
        "initial_state" => {
            cfg.initial_state = Some(
                parse_initial_state(value)
                    .ok_or_else(|| format!("initial_state: expected 'coherent <mean>', 'thermal' or 'fock <n>', got '{value}'"))?,
            )
        }
        "n_samples" => cfg.n_samples = Some(num(key, value)?),
        "injection_sample" => {
            cfg.injection_sample = Some(if value == "none" { None } else { Some(num(key, value)?) })
        }
        "emission_probability" => {
            cfg.emission_probability = Some(if value == "calibrate" {
                EmissionSetting::Calibrate
            } else {
                EmissionSetting::Fixed(num(key, value)?)
            })
        }
        "seed" => cfg.seed = Some(num(key, value)?),
        _ => return Ok(false),
    }
    Ok(true)
}

/// Splits a `key = value` line; `None` for blank and comment lines.
pub(crate) fn split_line(line: &str) -> Option<std::result::Result<(&str, &str), ()>> {
    let line = line.split('#').next().unwrap_or("").trim();
    if line.is_empty() {
        return None;
    }
    Some(line.split_once('=').map(|(k, v)| (k.trim(), v.trim())).ok_or(()))
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        for (i, line) in text.lines().enumerate() {
            let Some(kv) = split_line(line) else { continue };
            let (key, value) = kv.map_err(|_| Error::parse(path, i + 1, "expected 'key = value'"))?;
            match apply_key(&mut cfg, key, value) {
                Ok(true) => {}
                Ok(false) => return Err(Error::parse(path, i + 1, format!("unknown key '{key}'"))),
                Err(msg) => return Err(Error::parse(path, i + 1, msg)),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Resolves defaults and validates every constraint.
    pub fn resolve(&self, shape: Shape) -> Result<SimConfig> {
        let model_violations = self.model.violations();
        if !model_violations.is_empty() {
            return Err(Error::Config(Violations(model_violations)));
        }
        let shape = match shape {
            Shape::Auto if matches!(self.injection_sample, Some(Some(_))) => Shape::Experiment2,
            Shape::Auto => Shape::Experiment1,
            s => s,
        };
        let mut sim = match shape {
            Shape::Experiment2 => SimConfig::experiment2(self.model.clone())?,
            _ => SimConfig::experiment1(self.model.clone()),
        };
        if let Some(s) = self.initial_state {
            sim.initial_state = s;
        }
        if let Some(n) = self.n_samples {
            sim.n_samples = n;
        }
        if let Some(seed) = self.seed {
            sim.seed = seed;
        }
        match self.injection_sample {
            Some(None) => sim.injection = None,
            Some(Some(at)) => {
                let p = sim.injection.map_or(0.0, |i| i.emission_probability);
                sim.injection = Some(Injection { at_sample: at, emission_probability: p });
            }
            None => {}
        }
        if let Some(inj) = sim.injection.as_mut() {
            inj.emission_probability = match self.emission_probability {
                Some(EmissionSetting::Fixed(p)) => p,
                _ => calibrate_emission_probability(&self.model, SINGLE_G_SELECTION_FRACTION)?,
            };
        } else if self.emission_probability.is_some() {
            return Err(Error::Config(Violations(vec![Violation::new(
                "emission_probability",
                "set without an injection_sample",
            )])));
        }
        sim.validate()?;
        Ok(sim)
    }
}

/// Text rendering of a resolved configuration; parsing it back gives the same
/// [`SimConfig`].
pub fn render(sim: &SimConfig) -> String {
    use super::fmt_f64 as f;
    let m = &sim.model;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("n_max", m.n_max.to_string());
    kv("phi0", f(m.phi0));
    kv("fringe_offset", f(m.fringe_offset));
    kv("fringe_contrast", f(m.fringe_contrast));
    kv("phases", m.phases.iter().map(|p| f(*p)).collect::<Vec<_>>().join(", "));
    kv("t_sample", f(m.t_sample));
    kv("t_cavity", f(m.t_cavity));
    kv("n_thermal", f(m.n_thermal));
    kv("detection_efficiency", f(m.detection_efficiency));
    kv("mean_atoms_per_sample", f(m.mean_atoms_per_sample));
    kv("initial_state", format_initial_state(&sim.initial_state));
    kv("n_samples", sim.n_samples.to_string());
    match sim.injection {
        Some(inj) => {
            kv("injection_sample", inj.at_sample.to_string());
            kv("emission_probability", f(inj.emission_probability));
        }
        None => kv("injection_sample", "none".into()),
    }
    kv("seed", sim.seed.to_string());
    out
}

/// SHA-256 of the canonical rendering, hex encoded.
pub fn config_hash(sim: &SimConfig) -> String {
    hex::encode(Sha256::digest(render(sim).as_bytes()))
}

/// Loads `path` if given, otherwise the defaults.
pub fn load_or_default(path: Option<&PathBuf>, shape: Shape) -> Result<SimConfig> {
    let file = match path {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    file.resolve(shape)
}
