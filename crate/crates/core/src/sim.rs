//! Ground-truth photon-number trajectories and synthetic detection records.
//!
//! The cavity field is a birth-death jump process with downward rate
//! `kappa (1 + n_b) n` and upward rate `kappa n_b (n + 1)`, simulated exactly
//! with competing exponential clocks. Meter atoms arrive Poisson-distributed
//! in each sample, are detected with a fixed efficiency, and a detected atom's
//! outcome follows the Ramsey fringe at the true photon number.
//!
//! For the photon-injection experiment the resonant sample is drawn first
//! (atom count, emission and detection of each atom); the truth trajectory is
//! then simulated with the resulting photon increments at the injection time.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Violations};
use crate::fock::{fringe_probability, AtomDetection, ModelParams, Outcome, PhotonDistribution, Sample};

/// Fraction of injection runs with exactly one `g` detection reported for the
/// photon-injection experiment (2962 of 16320).
pub const SINGLE_G_SELECTION_FRACTION: f64 = 2962.0 / 16320.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Coherent { mean: f64 },
    Thermal,
    Fock { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    /// Zero-based index of the resonant sample.
    pub at_sample: usize,
    pub emission_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: ModelParams,
    pub initial_state: InitialState,
    pub n_samples: usize,
    pub injection: Option<Injection>,
    pub seed: u64,
}

impl SimConfig {
    /// Photon-number decay from a 12-photon coherent state over 7000 samples.
    pub fn experiment1(model: ModelParams) -> Self {
        Self {
            model,
            initial_state: InitialState::Coherent { mean: 12.0 },
            n_samples: 7000,
            injection: None,
            seed: 0,
        }
    }

    /// 4000 samples, one resonant injection sample, 4000 more samples, from
    /// the thermal state. The emission probability is calibrated to the
    /// reported single-`g` selection fraction.
    pub fn experiment2(model: ModelParams) -> Result<Self> {
        let p = calibrate_emission_probability(&model, SINGLE_G_SELECTION_FRACTION)?;
        Ok(Self {
            model,
            initial_state: InitialState::Thermal,
            n_samples: 8001,
            injection: Some(Injection { at_sample: 4000, emission_probability: p }),
            seed: 0,
        })
    }

    /// Highest photon number an initial state may start from.
    pub fn max_initial_n(&self) -> usize {
        self.model.n_max.saturating_sub(4)
    }

    /// Detection time of zero-based sample `i`.
    pub fn sample_time(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.model.t_sample
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.model.t_sample
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = self.model.violations();
        if self.n_samples == 0 {
            out.push(Violation::new("n_samples", "must be >= 1"));
        }
        match self.initial_state {
            InitialState::Coherent { mean } => {
                if !(mean >= 0.0) || !mean.is_finite() {
                    out.push(Violation::new("initial_state", format!("coherent mean must be >= 0, got {mean}")));
                } else if self.model.n_max >= 4 {
                    let tail = poisson_tail_above(mean, self.max_initial_n());
                    if tail >= 1e-2 {
                        out.push(Violation::new(
                            "initial_state",
                            format!(
                                "coherent mean {mean} puts {tail:.3e} probability above n = {}; raise n_max",
                                self.max_initial_n()
                            ),
                        ));
                    }
                }
            }
            InitialState::Fock { n } => {
                if n > self.max_initial_n() || self.model.n_max < 4 {
                    out.push(Violation::new(
                        "initial_state",
                        format!("Fock state {n} must be <= n_max - 4 = {}", self.max_initial_n()),
                    ));
                }
            }
            InitialState::Thermal => {}
        }
        if let Some(inj) = self.injection {
            if inj.at_sample >= self.n_samples {
                out.push(Violation::new(
                    "injection_sample",
                    format!("must be < n_samples = {}, got {}", self.n_samples, inj.at_sample),
                ));
            }
            if !(0.0..=1.0).contains(&inj.emission_probability) {
                out.push(Violation::new(
                    "emission_probability",
                    format!("must lie in [0, 1], got {}", inj.emission_probability),
                ));
            }
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
}

fn poisson_tail_above(mean: f64, n: usize) -> f64 {
    // P(N > n) = 1 - sum_{k<=n} e^-mean mean^k / k!
    let mut term = (-mean).exp();
    let mut cdf = 0.0;
    for k in 0..=n {
        if k > 0 {
            term *= mean / k as f64;
        }
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

/// Probability that the resonant sample holds exactly one detected atom, in
/// `g`: `lambda eta p exp(-lambda eta)` for Poisson atom numbers.
pub fn single_g_probability(model: &ModelParams, emission_probability: f64) -> f64 {
    let detected = model.mean_detected_per_sample();
    detected * emission_probability * (-detected).exp()
}

/// Emission probability reproducing `target` as the single-`g` fraction.
pub fn calibrate_emission_probability(model: &ModelParams, target: f64) -> Result<f64> {
    let per_unit = single_g_probability(model, 1.0);
    let p = target / per_unit;
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::Config(Violations(vec![Violation::new(
            "emission_probability",
            format!("selection fraction {target} unreachable: calibration gives {p}"),
        )])));
    }
    Ok(p)
}

/// Expected photons injected in runs passing the single-`g` selection: the
/// detected emitter plus undetected emitters, `1 + lambda (1 - eta) p`.
pub fn predicted_injected_photons(model: &ModelParams, emission_probability: f64) -> f64 {
    1.0 + model.mean_atoms_per_sample * (1.0 - model.detection_efficiency) * emission_probability
}

/// Per-realization random stream derived from a root seed. Independent of
/// scheduling, so serial and parallel ensembles coincide.
pub fn realization_rng(root_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonantAtom {
    pub emitted: bool,
    pub detected: bool,
}

/// Outcome of the resonant injection sample, drawn before the truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionDraw {
    pub at_sample: usize,
    pub atoms: Vec<ResonantAtom>,
}

impl InjectionDraw {
    pub fn photons(&self) -> usize {
        self.atoms.iter().filter(|a| a.emitted).count()
    }
}

pub fn draw_injection<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Option<InjectionDraw> {
    let inj = config.injection?;
    let n_atoms = draw_atom_count(config.model.mean_atoms_per_sample, rng);
    let atoms = (0..n_atoms)
        .map(|_| ResonantAtom {
            emitted: rng.random::<f64>() < inj.emission_probability,
            detected: rng.random::<f64>() < config.model.detection_efficiency,
        })
        .collect();
    Some(InjectionDraw { at_sample: inj.at_sample, atoms })
}

fn draw_atom_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(mean).expect("positive finite mean");
    poisson.sample(rng) as usize
}

/// Piecewise-constant true photon number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTrajectory {
    pub initial_n: usize,
    /// Sorted; simultaneous injected photons appear as repeated times.
    pub jump_times: Vec<f64>,
    /// Photon number right after each jump.
    pub photon_numbers: Vec<usize>,
}

impl TruthTrajectory {
    /// Photon number at time `t` (jumps at exactly `t` included).
    pub fn n_at(&self, t: f64) -> usize {
        let k = self.jump_times.partition_point(|&jt| jt <= t);
        if k == 0 {
            self.initial_n
        } else {
            self.photon_numbers[k - 1]
        }
    }

    /// Photon number at each of `times`, which must be sorted.
    pub fn sample_at(&self, times: &[f64]) -> Vec<usize> {
        let mut k = 0;
        let mut n = self.initial_n;
        times
            .iter()
            .map(|&t| {
                while k < self.jump_times.len() && self.jump_times[k] <= t {
                    n = self.photon_numbers[k];
                    k += 1;
                }
                n
            })
            .collect()
    }
}

fn draw_initial_n<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> usize {
    let limit = config.max_initial_n();
    match config.initial_state {
        InitialState::Fock { n } => n,
        InitialState::Coherent { mean } => loop {
            let n = draw_atom_count(mean, rng);
            if n <= limit {
                break n;
            }
        },
        InitialState::Thermal => {
            let dist = PhotonDistribution::thermal(limit + 1, config.model.n_thermal);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (n, p) in dist.probs().iter().enumerate() {
                acc += p;
                if u < acc {
                    return n;
                }
            }
            limit
        }
    }
}

struct JumpProcess<'a> {
    model: &'a ModelParams,
    t: f64,
    n: usize,
    jump_times: Vec<f64>,
    photon_numbers: Vec<usize>,
}

impl JumpProcess<'_> {
    fn push(&mut self, t: f64, n: usize) -> Result<()> {
        if n + 1 >= self.model.n_max {
            return Err(Error::TruncationOverflow { n, time: t });
        }
        self.n = n;
        self.jump_times.push(t);
        self.photon_numbers.push(n);
        Ok(())
    }

    fn run_until<R: Rng + ?Sized>(&mut self, end: f64, rng: &mut R) -> Result<()> {
        let kappa = self.model.kappa();
        let nb = self.model.n_thermal;
        loop {
            let down = kappa * (1.0 + nb) * self.n as f64;
            let up = kappa * nb * (self.n + 1) as f64;
            let total = down + up;
            if total <= 0.0 {
                break;
            }
            let wait: f64 = Exp1.sample(rng);
            let t = self.t + wait / total;
            if t > end {
                break;
            }
            self.t = t;
            let n = if rng.random::<f64>() * total < up { self.n + 1 } else { self.n - 1 };
            self.push(t, n)?;
        }
        self.t = end;
        Ok(())
    }
}

/// Exact event-time simulation over `[0, S T_a]`, with the injected photons
/// (if any) added at the injection sample's time.
pub fn simulate_truth<R: Rng + ?Sized>(
    config: &SimConfig,
    injection: Option<&InjectionDraw>,
    rng: &mut R,
) -> Result<TruthTrajectory> {
    let initial_n = draw_initial_n(config, rng);
    let mut process = JumpProcess {
        model: &config.model,
        t: 0.0,
        n: initial_n,
        jump_times: Vec::new(),
        photon_numbers: Vec::new(),
    };
    if let Some(draw) = injection {
        let t_inj = config.sample_time(draw.at_sample);
        process.run_until(t_inj, rng)?;
        for _ in 0..draw.photons() {
            let n = process.n + 1;
            process.push(t_inj, n)?;
        }
    }
    process.run_until(config.duration(), rng)?;
    Ok(TruthTrajectory {
        initial_n,
        jump_times: process.jump_times,
        photon_numbers: process.photon_numbers,
    })
}

/// A time-ordered sequence of meter samples and the model it was taken with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub model: ModelParams,
    pub samples: Vec<Sample>,
    pub seed: u64,
    /// Stream index within the seeded ensemble.
    pub stream: u64,
    pub injection: Option<Injection>,
    /// Present for simulated records only; never read by the estimator.
    pub truth: Option<TruthTrajectory>,
}

impl DetectionRecord {
    /// What the estimator may see: the samples alone.
    pub fn observations(&self) -> &[Sample] {
        &self.samples
    }

    pub fn detected_atoms(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| !s.resonant_injection)
            .map(|s| s.detections.len())
            .sum()
    }

    pub fn injection_sample(&self) -> Option<&Sample> {
        self.injection.and_then(|inj| self.samples.get(inj.at_sample))
    }
}

/// Draws meter outcomes for every sample given the truth.
pub fn generate_record<R: Rng + ?Sized>(
    config: &SimConfig,
    truth: &TruthTrajectory,
    injection: Option<&InjectionDraw>,
    rng: &mut R,
) -> DetectionRecord {
    let model = &config.model;
    let times: Vec<f64> = (0..config.n_samples).map(|i| config.sample_time(i)).collect();
    let photon_numbers = truth.sample_at(&times);
    let poisson = (model.mean_atoms_per_sample > 0.0)
        .then(|| Poisson::new(model.mean_atoms_per_sample).expect("positive finite mean"));

    let mut samples = Vec::with_capacity(config.n_samples);
    for (i, &n) in photon_numbers.iter().enumerate() {
        let phase_index = model.scheduled_phase(i);
        if let Some(draw) = injection.filter(|d| d.at_sample == i) {
            let detections = draw
                .atoms
                .iter()
                .filter(|a| a.detected)
                .map(|a| AtomDetection {
                    outcome: if a.emitted { Outcome::G } else { Outcome::E },
                    phase_index,
                })
                .collect();
            samples.push(Sample { detections, resonant_injection: true });
            continue;
        }
        let n_atoms = poisson.as_ref().map_or(0, |p| p.sample(rng) as usize);
        let mut detections = Vec::new();
        if n_atoms > 0 {
            let p_g = fringe_probability(model, Outcome::G, phase_index, n)
                .expect("truth stays inside the truncated space");
            for _ in 0..n_atoms {
                if rng.random::<f64>() < model.detection_efficiency {
                    let outcome = if rng.random::<f64>() < p_g { Outcome::G } else { Outcome::E };
                    detections.push(AtomDetection { outcome, phase_index });
                }
            }
        }
        samples.push(Sample { detections, resonant_injection: false });
    }
    DetectionRecord {
        model: model.clone(),
        samples,
        seed: config.seed,
        stream: 0,
        injection: config.injection,
        truth: Some(truth.clone()),
    }
}

/// Injection draw, truth and record for one realization, in that order.
pub fn simulate_realization<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<DetectionRecord> {
    let draw = draw_injection(config, rng);
    let truth = simulate_truth(config, draw.as_ref(), rng)?;
    Ok(generate_record(config, &truth, draw.as_ref(), rng))
}

/// Realization `index` of the ensemble rooted at `config.seed`.
pub fn simulate_indexed(config: &SimConfig, index: u64) -> Result<DetectionRecord> {
    let mut rng = realization_rng(config.seed, index);
    let mut record = simulate_realization(config, &mut rng)?;
    record.stream = index;
    Ok(record)
}

/// Exactly one detection in the sample, with outcome `g`.
pub fn is_single_g(sample: &Sample) -> bool {
    matches!(sample.detections.as_slice(), [d] if d.outcome == Outcome::G)
}

/// Records whose injection sample holds exactly one `g` detection and no `e`.
pub fn select_single_g(records: &[DetectionRecord], injection_sample: usize) -> Vec<&DetectionRecord> {
    records
        .iter()
        .filter(|r| r.samples.get(injection_sample).is_some_and(is_single_g))
        .collect()
}
