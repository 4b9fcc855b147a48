//! Photon-number (Fock-basis) model of the monitored cavity.
//!
//! Three objects live here: the diagonal state [`PhotonDistribution`], the
//! Ramsey fringe measurement model of a dispersive meter atom, and the
//! first-order cavity relaxation propagator `T = 1 + T_a K` built from the
//! birth-death generator `K`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Violations};

/// Physical constants of the cavity and the meter atoms. SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hilbert-space truncation: Fock levels `0..n_max`.
    pub n_max: usize,
    /// Dispersive phase shift per photon, radians.
    pub phi0: f64,
    /// Fringe offset `A`.
    pub fringe_offset: f64,
    /// Fringe contrast `B`.
    pub fringe_contrast: f64,
    /// Ramsey phases cycled over samples, radians.
    pub phases: Vec<f64>,
    /// Sample period `T_a`, seconds.
    pub t_sample: f64,
    /// Cavity energy damping time `T_c`, seconds.
    pub t_cavity: f64,
    /// Thermal photon number `n_b`.
    pub n_thermal: f64,
    pub detection_efficiency: f64,
    /// Mean number of atoms per sample before detection losses.
    pub mean_atoms_per_sample: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_max: 25,
            phi0: PI / 4.0,
            fringe_offset: 0.03,
            fringe_contrast: 0.71,
            phases: vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0],
            t_sample: 86e-6,
            t_cavity: 65e-3,
            n_thermal: 0.074,
            detection_efficiency: 0.30,
            mean_atoms_per_sample: 0.28 / 0.30,
        }
    }
}

impl ModelParams {
    /// Field energy damping rate `1/T_c`.
    pub fn kappa(&self) -> f64 {
        1.0 / self.t_cavity
    }

    /// Mean number of detected atoms per sample.
    pub fn mean_detected_per_sample(&self) -> f64 {
        self.mean_atoms_per_sample * self.detection_efficiency
    }

    /// Round-robin phase schedule used by the simulator.
    pub fn scheduled_phase(&self, sample_index: usize) -> usize {
        sample_index % self.phases.len()
    }

    /// Every violated constraint, in field order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = |x: f64| x.is_finite();

        if self.n_max < 2 {
            out.push(Violation::new("n_max", format!("must be >= 2, got {}", self.n_max)));
        }
        if !finite(self.phi0) {
            out.push(Violation::new("phi0", "must be finite"));
        }
        let (a, b) = (self.fringe_offset, self.fringe_contrast);
        if !finite(a) || !finite(b) {
            out.push(Violation::new("fringe_offset", "offset and contrast must be finite"));
        } else {
            if b < 0.0 {
                out.push(Violation::new("fringe_contrast", format!("must be >= 0, got {b}")));
            }
            if !(0.0..=1.0).contains(&(a + b)) {
                out.push(Violation::new(
                    "fringe_offset",
                    format!("fringe_offset + fringe_contrast must lie in [0, 1], got {}", a + b),
                ));
            }
            if a.abs() + b > 1.0 {
                out.push(Violation::new(
                    "fringe_offset",
                    format!("|fringe_offset| + fringe_contrast must be <= 1, got {}", a.abs() + b),
                ));
            }
        }
        if self.phases.is_empty() {
            out.push(Violation::new("phases", "must contain at least one phase"));
        } else if self.phases.iter().any(|p| !p.is_finite()) {
            out.push(Violation::new("phases", "all phases must be finite"));
        }
        let timing_ok = finite(self.t_sample) && finite(self.t_cavity);
        if !(self.t_sample > 0.0) || !finite(self.t_sample) {
            out.push(Violation::new("t_sample", format!("must be > 0, got {}", self.t_sample)));
        }
        if !(self.t_cavity > 0.0) || !finite(self.t_cavity) {
            out.push(Violation::new("t_cavity", format!("must be > 0, got {}", self.t_cavity)));
        }
        if !(self.n_thermal >= 0.0) || !finite(self.n_thermal) {
            out.push(Violation::new("n_thermal", format!("must be >= 0, got {}", self.n_thermal)));
        }
        if timing_ok && self.t_sample > 0.0 && self.t_cavity > 0.0 {
            let ratio = self.t_sample / self.t_cavity;
            if ratio >= 0.1 {
                out.push(Violation::new(
                    "t_sample",
                    format!("t_sample / t_cavity must be < 0.1 for the first-order propagator, got {ratio}"),
                ));
            }
            if self.n_thermal >= 0.0 && self.n_max >= 2 {
                let edge = self.t_sample * self.kappa() * (1.0 + self.n_thermal) * self.n_max as f64;
                let max_rate = (0..self.n_max)
                    .map(|n| -self.generator_diagonal(n))
                    .fold(0.0, f64::max);
                if edge >= 1.0 || self.t_sample * max_rate >= 1.0 {
                    out.push(Violation::new(
                        "t_sample",
                        format!(
                            "t_sample * kappa * (1 + n_thermal) * n_max must be < 1 so the relaxation step stays nonnegative, got {edge}"
                        ),
                    ));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.detection_efficiency) {
            out.push(Violation::new(
                "detection_efficiency",
                format!("must lie in [0, 1], got {}", self.detection_efficiency),
            ));
        }
        if !(self.mean_atoms_per_sample >= 0.0) || !finite(self.mean_atoms_per_sample) {
            out.push(Violation::new(
                "mean_atoms_per_sample",
                format!("must be >= 0, got {}", self.mean_atoms_per_sample),
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(Violations(v)))
        }
    }

    fn generator_diagonal(&self, n: usize) -> f64 {
        let kappa = self.kappa();
        let nb = self.n_thermal;
        let down = (1.0 + nb) * n as f64;
        let up = if n + 1 < self.n_max { nb * (n + 1) as f64 } else { 0.0 };
        -kappa * (down + up)
    }
}

/// Meter atom detection outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    G,
    E,
}

impl Outcome {
    /// `j = +1` for `g`, `-1` for `e`.
    pub fn sign(self) -> f64 {
        match self {
            Outcome::G => 1.0,
            Outcome::E => -1.0,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Outcome::G => 'g',
            Outcome::E => 'e',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'g' => Some(Outcome::G),
            'e' => Some(Outcome::E),
            _ => None,
        }
    }

    fn index(self) -> usize {
        match self {
            Outcome::G => 0,
            Outcome::E => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomDetection {
    pub outcome: Outcome,
    pub phase_index: usize,
}

/// One meter sample: every atom detected in it, possibly none.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub detections: Vec<AtomDetection>,
    /// Set only on the resonant photon-injection sample; its atoms carry no
    /// dispersive information and the sample acts as the identity.
    pub resonant_injection: bool,
}

impl Sample {
    pub fn empty() -> Self {
        Self::default()
    }

    /// True when the sample leaves the distribution unchanged.
    pub fn is_identity(&self) -> bool {
        self.resonant_injection || self.detections.is_empty()
    }
}

/// Probability vector over the Fock states `0..n_max`.
///
/// Entries are nonnegative. Whether they sum to one depends on context: the
/// estimator works with unnormalized vectors between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonDistribution(Vec<f64>);

impl PhotonDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty photon distribution".into()));
        }
        if let Some((n, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::Domain(format!("entry {n} is {p}, expected a finite value >= 0")));
        }
        Ok(Self(probs))
    }

    pub fn uniform(n_max: usize) -> Self {
        Self(vec![1.0 / n_max as f64; n_max])
    }

    pub fn fock(n_max: usize, n: usize) -> Result<Self> {
        if n >= n_max {
            return Err(Error::Domain(format!("Fock state {n} outside 0..{n_max}")));
        }
        let mut p = vec![0.0; n_max];
        p[n] = 1.0;
        Ok(Self(p))
    }

    /// Thermal state with mean occupation `n_thermal`, truncated and renormalized.
    pub fn thermal(n_max: usize, n_thermal: f64) -> Self {
        let ratio = n_thermal / (1.0 + n_thermal);
        let mut p = Vec::with_capacity(n_max);
        let mut w = 1.0;
        for _ in 0..n_max {
            p.push(w);
            w *= ratio;
        }
        let mut d = Self(p);
        d.normalize();
        d
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub(crate) fn probs_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Scales to unit sum and returns the previous sum. A zero vector is left
    /// untouched.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.total();
        if norm > 0.0 {
            self.0.iter_mut().for_each(|p| *p /= norm);
        }
        norm
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// Standard deviation of `n`, with tiny negative variances clamped to zero.
    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self.0.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum();
        (second - mean * mean).max(0.0).sqrt()
    }

    /// Most likely photon number; ties go to the smaller `n`.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (n, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = n;
            }
        }
        best
    }
}

/// Conditional probability to detect a meter atom in `outcome` after it
/// crossed a cavity holding `n` photons with Ramsey phase `phases[phase_index]`.
pub fn fringe_probability(
    params: &ModelParams,
    outcome: Outcome,
    phase_index: usize,
    n: usize,
) -> Result<f64> {
    if n >= params.n_max {
        return Err(Error::Domain(format!("photon number {n} outside 0..{}", params.n_max)));
    }
    let phase = *params.phases.get(phase_index).ok_or_else(|| {
        Error::Domain(format!(
            "phase index {phase_index} outside 0..{}",
            params.phases.len()
        ))
    })?;
    Ok(fringe(params, outcome, phase, n))
}

fn fringe(params: &ModelParams, outcome: Outcome, phase: f64, n: usize) -> f64 {
    let j = outcome.sign();
    let light_shift = params.phi0 * (n as f64 + 0.5);
    let arg = light_shift - params.phi0 / 2.0 - phase;
    let p = (1.0 + j * params.fringe_offset + j * params.fringe_contrast * arg.sin()) / 2.0;
    p.clamp(0.0, 1.0)
}

/// Tridiagonal `n_max x n_max` matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// `lower[n] = M[n][n-1]`; `lower[0]` is unused and zero.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// `upper[n] = M[n][n+1]`; the last entry is unused and zero.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if col + 1 == row {
            self.lower[row]
        } else if row + 1 == col {
            self.upper[row]
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| (0..n).map(|c| self.get(r, c)).collect()).collect()
    }

    /// `out = M v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    /// `out = M^T v`.
    pub fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.upper[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.lower[i + 1] * v[i + 1];
            }
            out[i] = acc;
        }
    }
}

/// Birth-death generator of cavity relaxation.
///
/// The top level `n_max - 1` has no upward outflow, which keeps every column
/// summing to zero on the truncated space.
pub fn relaxation_generator(params: &ModelParams) -> Tridiagonal {
    let n_max = params.n_max;
    let kappa = params.kappa();
    let nb = params.n_thermal;
    let mut lower = vec![0.0; n_max];
    let mut upper = vec![0.0; n_max];
    let diag = (0..n_max).map(|n| params.generator_diagonal(n)).collect();
    for n in 0..n_max {
        if n >= 1 {
            lower[n] = kappa * nb * n as f64;
        }
        if n + 1 < n_max {
            upper[n] = kappa * (1.0 + nb) * (n + 1) as f64;
        }
    }
    Tridiagonal { lower, diag, upper }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `T`, used by the forward filter.
    Forward,
    /// `T^T`, used by the backward (effect) filter.
    Backward,
}

/// First-order relaxation propagator `T = 1 + dt K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator(Tridiagonal);

impl Propagator {
    pub fn new(generator: &Tridiagonal, dt: f64) -> Self {
        let mut t = generator.clone();
        t.lower.iter_mut().for_each(|x| *x *= dt);
        t.upper.iter_mut().for_each(|x| *x *= dt);
        t.diag.iter_mut().for_each(|x| *x = 1.0 + *x * dt);
        Self(t)
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.0
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64], direction: Direction) {
        match direction {
            Direction::Forward => self.0.apply(v, out),
            Direction::Backward => self.0.apply_transpose(v, out),
        }
    }
}

/// Validated model with precomputed fringe weights and propagator.
#[derive(Debug, Clone)]
pub struct FockModel {
    params: ModelParams,
    /// `weights[phase][outcome][n]`.
    weights: Vec<[Vec<f64>; 2]>,
    generator: Tridiagonal,
    propagator: Propagator,
}

impl FockModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let weights = params
            .phases
            .iter()
            .map(|&phase| {
                [Outcome::G, Outcome::E]
                    .map(|o| (0..params.n_max).map(|n| fringe(&params, o, phase, n)).collect())
            })
            .collect();
        let generator = relaxation_generator(&params);
        let propagator = Propagator::new(&generator, params.t_sample);
        Ok(Self {
            params,
            weights,
            generator,
            propagator,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n_max(&self) -> usize {
        self.params.n_max
    }

    pub fn generator(&self) -> &Tridiagonal {
        &self.generator
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    /// Fringe weight vector over `n` for one detection.
    pub fn fringe_weights(&self, detection: AtomDetection) -> &[f64] {
        &self.weights[detection.phase_index][detection.outcome.index()]
    }

    /// Checks that every detection references a known phase.
    pub fn check_samples(&self, samples: &[Sample]) -> Result<()> {
        let n_phases = self.params.phases.len();
        for (i, s) in samples.iter().enumerate() {
            if let Some(d) = s.detections.iter().find(|d| d.phase_index >= n_phases) {
                return Err(Error::Domain(format!(
                    "sample {i}: phase index {} outside 0..{n_phases}",
                    d.phase_index
                )));
            }
        }
        Ok(())
    }

    /// In-place measurement update; no renormalization.
    pub fn apply_measurement(&self, sample: &Sample, probs: &mut [f64]) {
        if sample.is_identity() {
            return;
        }
        for &d in &sample.detections {
            for (p, w) in probs.iter_mut().zip(self.fringe_weights(d)) {
                *p *= w;
            }
        }
    }

    /// Multiplies each entry by the product of the sample's fringe factors.
    /// The result is not renormalized.
    pub fn measurement_update(&self, sample: &Sample, dist: &PhotonDistribution) -> PhotonDistribution {
        let mut out = dist.clone();
        self.apply_measurement(sample, out.probs_mut());
        out
    }

    /// Applies `T` (forward) or `T^T` (backward) over one sample period.
    pub fn relaxation_step(&self, dist: &PhotonDistribution, direction: Direction) -> PhotonDistribution {
        let mut out = vec![0.0; dist.len()];
        self.propagator.apply(dist.probs(), &mut out, direction);
        PhotonDistribution(out)
    }
}
