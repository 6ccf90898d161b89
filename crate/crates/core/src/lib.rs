//! Models of a single-photon weak coin flipping protocol over a lossy
//! three-beam-splitter interferometer.
//!
//! - [`optics`]: detection probabilities from reflectivities, efficiencies and
//!   interference visibility.
//! - [`protocol`]: outcome rules, honest operating point, channel loss and
//!   calibration.
//! - [`adversary`]: cheating strategies, interest and sanctions.
//! - [`montecarlo`]: run-level simulation with source noise and slow phase drift.
//! - [`spdc`]: joint spectrum and purity of the heralded photon source.
//! - [`cli`]: configuration files and the `wcf` command line.

pub mod adversary;
pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod optics;
pub mod protocol;
pub mod spdc;

pub use error::{Error, Result};
pub use optics::{InterferenceModel, PathEfficiencies, Reflectivities};
pub use protocol::{Outcome, OutcomeDistribution};
