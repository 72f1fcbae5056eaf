use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kernels::KernelMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// `K` independent SGLD chains.
    Sgld,
    /// Deterministic Stein variational gradient descent.
    Svgd,
    /// SVGD drift plus kernel-correlated Langevin noise.
    SgldR,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Sgld => "sgld",
            Method::Svgd => "svgd",
            Method::SgldR => "sgld_r",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgld" => Ok(Method::Sgld),
            "svgd" => Ok(Method::Svgd),
            "sgld_r" | "sgld-r" | "sgldr" => Ok(Method::SgldR),
            other => Err(Error::config(format!(
                "unknown method `{other}` (expected sgld, svgd or sgld_r)"
            ))),
        }
    }
}

/// Step size `ε_t` as a function of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant {
        value: f64,
    },
    /// `a (b + t)^(−γ)`.
    Polynomial {
        a: f64,
        b: f64,
        gamma: f64,
    },
}

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Constant { value } => value,
            StepSchedule::Polynomial { a, b, gamma } => a * (b + t as f64).powf(-gamma),
        }
    }

    /// Rejects schedules that can yield a non-positive or non-finite step.
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant { value } if value > 0.0 && value.is_finite() => Ok(()),
            StepSchedule::Constant { value } => Err(Error::config(format!(
                "step_size.value must be positive, got {value}"
            ))),
            StepSchedule::Polynomial { a, b, gamma } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::config(format!(
                        "step_size.a must be positive, got {a}"
                    )));
                }
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::config(format!(
                        "step_size.b must be positive, got {b}"
                    )));
                }
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::config(format!(
                        "step_size.gamma must be non-negative, got {gamma}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Step size at iteration `t`.
pub fn step_size(schedule: &StepSchedule, t: u64) -> f64 {
    schedule.at(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub particle_count: usize,
    pub step_size: StepSchedule,
    pub total_iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub kernel: KernelMode,
    pub noise_enabled: bool,
    /// Fraction of the run after which the kernel is switched to the
    /// identity. `1.0` keeps the repulsion on throughout.
    pub repulsion_cutoff_fraction: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    /// 10 particles, 500 burn-in iterations followed by 500 collected every
    /// 10th iteration.
    fn default() -> Self {
        SamplerConfig {
            method: Method::SgldR,
            particle_count: 10,
            step_size: StepSchedule::Constant { value: 0.1 },
            total_iterations: 1000,
            burn_in: 500,
            thin: 10,
            kernel: KernelMode::RbfMedian,
            noise_enabled: true,
            repulsion_cutoff_fraction: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::config("sampler.particles must be at least 1"));
        }
        if self.burn_in >= self.total_iterations {
            return Err(Error::config(format!(
                "sampler.burn_in ({}) must be smaller than sampler.iterations ({})",
                self.burn_in, self.total_iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::config("sampler.thin must be at least 1"));
        }
        self.step_size.validate()?;
        if let KernelMode::RbfFixed { h } = self.kernel {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("kernel.h must be positive, got {h}")));
            }
        }
        if !(0.0..=1.0).contains(&self.repulsion_cutoff_fraction) {
            return Err(Error::config(format!(
                "sampler.repulsion_cutoff_fraction must lie in [0, 1], got {}",
                self.repulsion_cutoff_fraction
            )));
        }
        Ok(())
    }

    /// Kernel used at step `t`: the configured one until the repulsion
    /// cutoff, the identity afterwards.
    pub fn kernel_at(&self, t: u64) -> KernelMode {
        if (t as f64) >= self.repulsion_cutoff_fraction * self.total_iterations as f64
            && self.repulsion_cutoff_fraction < 1.0
        {
            KernelMode::Identity
        } else {
            self.kernel
        }
    }

    /// Number of snapshots a run collects.
    pub fn snapshot_count(&self) -> u64 {
        (self.total_iterations - self.burn_in) / self.thin
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("sampler config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
