use rand::{Rng, RngCore};

use super::{check_dim, log_sum_exp, softmax, Target};
use crate::{Error, Result};

/// `p(z) = Σ_i π_i λ_i exp(−λ_i z)` on `z ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfExponentials {
    rates: Vec<f64>,
    weights: Vec<f64>,
    log_coef: Vec<f64>,
}

impl MixtureOfExponentials {
    pub fn new(rates: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.len() != weights.len() {
            return Err(Error::config(format!(
                "mixture of exponentials needs matching non-empty rates and weights (got {} and {})",
                rates.len(),
                weights.len()
            )));
        }
        if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::config(format!(
                "exponential rates must be positive, got {r}"
            )));
        }
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
            return Err(Error::config("mixture weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        let log_coef = rates
            .iter()
            .zip(&weights)
            .map(|(l, w)| w.ln() + l.ln())
            .collect();
        Ok(MixtureOfExponentials {
            rates,
            weights,
            log_coef,
        })
    }

    /// The two-component benchmark mixture: `λ = (1.5, 0.5)`, `π = (1/3, 2/3)`.
    pub fn benchmark() -> Self {
        Self::new(vec![1.5, 0.5], vec![1.0 / 3.0, 2.0 / 3.0]).expect("valid benchmark mixture")
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Normalized density; zero off the support.
    pub fn density(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        self.rates
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * l * (-l * z).exp())
            .sum()
    }

    /// Exact `E[z^n] = Σ π_i n! / λ_i^n`.
    pub fn analytic_moment(&self, n: u32) -> f64 {
        let factorial: f64 = (1..=n).map(f64::from).product();
        self.rates
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * factorial / l.powi(n as i32))
            .sum()
    }

    /// Exact draw: categorical component choice, then inverse CDF.
    pub fn sample_exact<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = self.rates.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = i;
                break;
            }
        }
        // 1 - U lies in (0, 1], so the log is finite.
        let v: f64 = 1.0 - rng.random::<f64>();
        -v.ln() / self.rates[component]
    }

    fn component_logits(&self, z: f64) -> Vec<f64> {
        self.log_coef
            .iter()
            .zip(&self.rates)
            .map(|(c, l)| c - l * z)
            .collect()
    }
}

impl Target for MixtureOfExponentials {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> &str {
        "moe-base"
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self, z)?;
        if z[0].is_nan() || z[0] < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(log_sum_exp(&self.component_logits(z[0])))
    }

    fn grad_log_density(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self, z)?;
        if z[0].is_nan() || z[0] < 0.0 {
            return Err(Error::argument(format!(
                "mixture of exponentials is supported on z >= 0, got {}",
                z[0]
            )));
        }
        let resp = softmax(&self.component_logits(z[0]));
        Ok(vec![-resp
            .iter()
            .zip(&self.rates)
            .map(|(r, l)| r * l)
            .sum::<f64>()])
    }

    fn init_particle(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        vec![self.sample_exact(rng)]
    }
}

/// A positive-orthant target seen through `y = log z` coordinate-wise:
/// `log p(y) = log p_base(exp(y)) + Σ_c y_c`.
#[derive(Debug, Clone)]
pub struct LogReparameterized<B> {
    base: B,
    name: String,
}

impl<B: Target> LogReparameterized<B> {
    pub fn new(base: B) -> Self {
        let name = format!("log-{}", base.name());
        LogReparameterized { base, name }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn base(&self) -> &B {
        &self.base
    }
}

impl<B: Target> Target for LogReparameterized<B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn log_density(&self, y: &[f64]) -> Result<f64> {
        check_dim(self, y)?;
        let z: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        Ok(self.base.log_density(&z)? + y.iter().sum::<f64>())
    }

    fn grad_log_density(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self, y)?;
        let z: Vec<f64> = y.iter().map(|v| v.exp()).collect();
        let g = self.base.grad_log_density(&z)?;
        Ok(g.iter().zip(&z).map(|(g, z)| g * z + 1.0).collect())
    }
}
