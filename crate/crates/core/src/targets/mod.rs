//! Target distributions `π(z) ∝ exp(−H(z))`.
//!
//! Every target exposes an unnormalized log-density and its analytic
//! gradient `∇ log π = −∇H`. The samplers only ever consume gradients, so
//! normalization constants are dropped throughout.

mod gaussian;
mod mixture_exp;
mod mog;

pub use gaussian::StandardGaussian;
pub use mixture_exp::{LogReparameterized, MixtureOfExponentials};
pub use mog::GaussianGridMixture;

use ndarray::{Array2, ArrayView2};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// A differentiable (unnormalized) log-density on `ℝ^d`.
///
/// Implementations are pure functions of their parameters and `z`, so a
/// single target can be shared across threads.
pub trait Target: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> &str;

    /// `log π(z)` up to an additive constant fixed per target.
    fn log_density(&self, z: &[f64]) -> Result<f64>;

    /// Analytic `∇ log π(z)`.
    fn grad_log_density(&self, z: &[f64]) -> Result<Vec<f64>>;

    /// Gradient estimates for a whole ensemble at one sampler step.
    ///
    /// Row `i` of the result is the (possibly stochastic) gradient for row `i`
    /// of `particles`. Randomness shared by the step, such as the minibatch,
    /// is drawn from `rng`. The default evaluates the exact gradient and
    /// consumes no randomness.
    fn step_gradients(
        &self,
        particles: ArrayView2<'_, f64>,
        rng: &mut dyn RngCore,
    ) -> Result<Array2<f64>> {
        let _ = rng;
        let mut grads = Array2::zeros(particles.raw_dim());
        for (row, mut out) in particles.rows().into_iter().zip(grads.rows_mut()) {
            let z = row.to_vec();
            let g = self.grad_log_density(&z)?;
            out.iter_mut().zip(g).for_each(|(o, v)| *o = v);
        }
        Ok(grads)
    }

    /// Draws one initial particle in the sampling space. Defaults to `N(0, I)`.
    fn init_particle(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim())
            .map(|_| StandardNormal.sample(&mut *rng))
            .collect()
    }
}

pub(crate) fn check_dim(target: &dyn Target, z: &[f64]) -> Result<()> {
    if z.len() != target.dim() {
        return Err(Error::argument(format!(
            "{}: expected a point of dimension {}, got {}",
            target.name(),
            target.dim(),
            z.len()
        )));
    }
    Ok(())
}

/// Central-difference approximation of `∇ log π(z)` with step `h`.
pub fn finite_diff_gradient(target: &dyn Target, z: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::argument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    check_dim(target, z)?;
    let mut probe = z.to_vec();
    let mut grad = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        probe[i] = z[i] + h;
        let up = target.log_density(&probe)?;
        probe[i] = z[i] - h;
        let down = target.log_density(&probe)?;
        probe[i] = z[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::numerical(format!(
                "{}: non-finite log-density while probing coordinate {i}",
                target.name()
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `log Σ exp(x_i)` with the maximum subtracted.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized mixture responsibilities `softmax(logits)`.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}
