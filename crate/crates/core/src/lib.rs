//! Seeded simulator and oracle toolkit for consequence-sensitive arbitration
//! under regulated support resolution.
//!
//! Each trial draws a binary latent state observed through two Gaussian
//! channels, compresses a three-bit support vector at the resolution chosen
//! by a controller, and lets a tabular learner pick `act`, `verify` or
//! `abstain` from the compressed policy state. The [`oracle`] module computes
//! the full-geometry and compressed-optimal reference policies and the
//! control loss induced by compression.
//!
//! Numeric modules are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod controllers;
pub mod env;
pub mod memory;
pub mod metrics;
pub mod oracle;
pub mod runner;
pub mod scalar;
pub mod support;
pub mod utility;

pub use scalar::Real;

pub type EnvConfig = env::EnvConfig<f64>;
pub type TrialContext = env::TrialContext<f64>;
pub type BeliefState = support::BeliefState<f64>;
pub type UtilityConfig = utility::UtilityConfig<f64>;
pub type ArbitrationMemory = memory::ArbitrationMemory<f64>;
pub type TrialRecord = runner::TrialRecord<f64>;
pub type RunSummary = metrics::RunSummary<f64>;
pub type RunConfig = runner::RunConfig<f64>;
