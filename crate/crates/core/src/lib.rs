//! Likelihood-free inference with stratified-distance ABC-SMC.
//!
//! The sampler keeps a fixed, decreasing tolerance schedule and tags every
//! particle with the distance band its simulation fell in. Four kernel
//! policies are available: a shared global covariance, per-particle local
//! covariances, band-aware stratified covariances, and stratified
//! covariances combined with predictive reweighting of the sampling
//! distribution. The [`bench`] module runs repeated paired comparisons and
//! writes CSV/JSON summaries.

pub mod bench;
pub mod error;
pub mod kernels;
pub mod models;
mod parallel;
pub mod population;
pub mod rng;
pub mod schedule;
pub mod smc;
pub mod stratify;

pub use error::{Error, Result};
pub use kernels::KernelPolicy;
pub use models::SimulatorModel;
pub use population::{Particle, Population};
pub use schedule::{Band, ThresholdSchedule};
pub use smc::{run, IterationRecord, RunRecord, SmcConfig, StoppingRule};
