//! Particle-based posterior samplers.
//!
//! Three update rules share one code path:
//!
//! * parallel SGLD: `K` independent Langevin chains,
//! * SVGD: deterministic kernelized particle flow,
//! * SGLD+R: the SVGD drift plus Gaussian noise whose covariance across
//!   particles is the kernel Gram matrix, which turns the interacting particle
//!   system into a valid multi-chain stochastic-gradient MCMC sampler.
//!
//! The crate also ships the synthetic benchmark targets (mixture of
//! exponentials, 3×3 Gaussian grid), a Bayesian neural network regression
//! target, and the diagnostics used to compare the samplers (ESS, ESS/s,
//! moment error, mode coverage).
//!
//! ```
//! use sgldr::sampler::{run, Method, SamplerConfig, StepSchedule};
//! use sgldr::targets::StandardGaussian;
//!
//! let config = SamplerConfig {
//!     method: Method::SgldR,
//!     particle_count: 5,
//!     step_size: StepSchedule::Constant { value: 0.05 },
//!     total_iterations: 100,
//!     burn_in: 50,
//!     thin: 10,
//!     ..SamplerConfig::default()
//! };
//! let trace = run(&config, &StandardGaussian::new(2)).unwrap();
//! assert_eq!(trace.snapshots().len(), 5);
//! ```

pub mod bnn;
pub mod diagnostics;
mod error;
pub mod experiment;
pub mod kernels;
pub mod sampler;
pub mod targets;
pub mod trace;

pub use error::{Error, Result};
pub use kernels::{KernelMode, KernelState};
pub use sampler::{Method, ParticleEnsemble, SamplerConfig, StepSchedule};
pub use targets::Target;
pub use trace::TraceStore;
