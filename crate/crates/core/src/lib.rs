//! Past-quantum-state analysis of QND photon counting in a lossy cavity.
//!
//! * [`fock`]: Fock-basis distributions, Ramsey meter model, relaxation propagator.
//! * [`estimator`]: forward, backward and PQS filters, summaries, jump times.
//! * [`sim`]: ground-truth jump trajectories and synthetic detection records.
//! * [`experiments`]: ensemble runs of the decay and photon-injection experiments.
//! * [`fit`]: exponential decay fit.
//! * [`io`]: config, record and artifact file formats and the CLI commands.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod fit;
pub mod fock;
pub mod io;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{
    backward_filter, combine_pqs, forward_filter, jump_time, smooth, smooth_uniform, summarize, Crossing,
    SmoothedTrajectory, SummarySeries,
};
pub use fock::{AtomDetection, Direction, FockModel, ModelParams, Outcome, PhotonDistribution, Sample};
pub use sim::{DetectionRecord, InitialState, Injection, SimConfig, TruthTrajectory};
