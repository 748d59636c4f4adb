//! Simulation and regime analysis for a stochastic delayed two-prey/one-predator
//! system with multiplicative Brownian noise and compensated compound-Poisson
//! jumps.
//!
//! * [`model`]: parameters, drift/diffusion/jump terms, validation.
//! * [`engine`]: Euler–Maruyama sample paths with delay taps.
//! * [`analysis`]: closed-form extinction/persistence/boundedness criteria
//!   and running time averages.
//! * [`ensemble`]: Monte Carlo replicate sets and empirical regime checks.
//! * [`oracle`]: deterministic RK4 reference solver and convergence studies.

pub mod model;
pub mod rng;
pub mod engine;
pub mod analysis;
pub mod ensemble;
pub mod oracle;

pub use engine::{simulate, EngineError, JumpClock, StepConfig, Trajectory};
pub use model::{DelaySpec, HistorySpec, ModelParams, NoiseSpec, State};
