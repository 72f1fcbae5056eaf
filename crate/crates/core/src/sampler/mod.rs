//! Parallel SGLD, SVGD and SGLD+R updates and the sampling run loop.
//!
//! All three rules act on a `K × d` [`ParticleEnsemble`]. The SVGD drift for
//! particle `i` is
//!
//! ```text
//! φ_i = (1/K) Σ_j [ k(z_j, z_i) ∇log π(z_j) + ∇_{z_j} k(z_j, z_i) ]
//! ```
//!
//! evaluated in matrix form as `(K̄ G + Γ̄) / K`. SGLD+R adds noise
//! `η ~ N(0, 2ε K/K)` where the `Kd × Kd` covariance `K` couples particles
//! through `K̄` and leaves coordinates independent.

mod config;
mod ensemble;
mod rng;
mod run;
mod step;

pub use config::{step_size, Method, SamplerConfig, StepSchedule};
pub use ensemble::ParticleEnsemble;
pub use rng::StepRng;
pub use run::{run, run_with_init};
pub use step::{sample_repulsion_noise, sgld_r_step, sgld_step, svgd_drift, svgd_step};
