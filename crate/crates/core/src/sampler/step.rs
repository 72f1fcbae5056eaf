use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::{ParticleEnsemble, StepRng};
use crate::kernels::KernelState;
use crate::targets::Target;
use crate::{Error, Result};

fn check_step(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::argument(format!(
            "step size must be positive, got {eps}"
        )));
    }
    Ok(())
}

fn gradients(
    ensemble: &ParticleEnsemble,
    target: &dyn Target,
    rng: &StepRng,
) -> Result<Array2<f64>> {
    if ensemble.dim() != target.dim() {
        return Err(Error::argument(format!(
            "ensemble dimension {} does not match target `{}` dimension {}",
            ensemble.dim(),
            target.name(),
            target.dim()
        )));
    }
    let grads = target.step_gradients(ensemble.particles(), &mut rng.shared())?;
    if let Some(i) = grads
        .rows()
        .into_iter()
        .position(|r| r.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::numerical(format!(
            "non-finite gradient at particle {i}"
        )));
    }
    Ok(grads)
}

/// Standard normal `K × d` draws; row `i` comes from particle `i`'s stream.
fn standard_normals(k: usize, d: usize, rng: &StepRng) -> Array2<f64> {
    let mut xi = Array2::zeros((k, d));
    for (i, mut row) in xi.rows_mut().into_iter().enumerate() {
        let mut stream = rng.particle(i);
        row.iter_mut()
            .for_each(|v| *v = StandardNormal.sample(&mut stream));
    }
    xi
}

/// Unscaled SVGD drift `K̄ G + Γ̄`, where row `i` of `grads` is
/// `∇log π(z_i)`. The step applies it as `z ← z + (ε/K)·drift`.
pub fn svgd_drift(
    particles: ArrayView2<'_, f64>,
    grads: ArrayView2<'_, f64>,
    kernel: &KernelState,
) -> Array2<f64> {
    debug_assert_eq!(kernel.particle_count(), particles.nrows());
    kernel.smooth(grads) + kernel.repulsion(particles)
}

fn kernel_drift_update(
    ensemble: &ParticleEnsemble,
    target: &dyn Target,
    kernel: &KernelState,
    eps: f64,
    rng: &StepRng,
) -> Result<Array2<f64>> {
    check_step(eps)?;
    if kernel.particle_count() != ensemble.particle_count() {
        return Err(Error::argument(format!(
            "kernel built for {} particles, ensemble has {}",
            kernel.particle_count(),
            ensemble.particle_count()
        )));
    }
    let grads = gradients(ensemble, target, rng)?;
    let drift = svgd_drift(ensemble.particles(), grads.view(), kernel);
    let scale = eps / ensemble.particle_count() as f64;
    Ok(&ensemble.particles() + &(drift * scale))
}

/// One SVGD step: `z_i ← z_i + (ε/K) Σ_j [k(z_j, z_i)∇log π(z_j) + ∇_{z_j}k(z_j, z_i)]`.
///
/// `rng` is only consulted by targets with stochastic gradients.
pub fn svgd_step(
    ensemble: &ParticleEnsemble,
    target: &dyn Target,
    kernel: &KernelState,
    eps: f64,
    rng: &StepRng,
) -> Result<ParticleEnsemble> {
    let next = kernel_drift_update(ensemble, target, kernel, eps, rng)?;
    ensemble.advance(next)
}

/// One step of `K` independent SGLD chains:
/// `z_i ← z_i + ε∇log π(z_i) + N(0, 2ε I)`.
pub fn sgld_step(
    ensemble: &ParticleEnsemble,
    target: &dyn Target,
    eps: f64,
    noise_enabled: bool,
    rng: &StepRng,
) -> Result<ParticleEnsemble> {
    check_step(eps)?;
    let grads = gradients(ensemble, target, rng)?;
    let mut next = &ensemble.particles() + &(grads * eps);
    if noise_enabled {
        let xi = standard_normals(ensemble.particle_count(), ensemble.dim(), rng);
        next = next + xi * (2.0 * eps).sqrt();
    }
    ensemble.advance(next)
}

/// Noise `η ~ N(0, (2ε/K)·K)` in the `Kd`-dimensional particle-major space.
///
/// The big covariance is `d` copies of `K̄` interleaved, so each coordinate
/// column is drawn independently as `η_{:,c} = sqrt(2ε/K)·L ξ_c` with
/// `L Lᵀ = K̄ + jitter·I`.
pub fn sample_repulsion_noise(
    kernel: &KernelState,
    eps: f64,
    particle_count: usize,
    dim: usize,
    rng: &StepRng,
) -> Result<Array2<f64>> {
    check_step(eps)?;
    if kernel.particle_count() != particle_count {
        return Err(Error::argument(format!(
            "kernel built for {} particles, noise requested for {particle_count}",
            kernel.particle_count()
        )));
    }
    let xi = standard_normals(particle_count, dim, rng);
    let scale = (2.0 * eps / particle_count as f64).sqrt();
    Ok(kernel.psd_factor().dot(&xi) * scale)
}

/// One SGLD+R step: the SVGD update plus [`sample_repulsion_noise`].
///
/// With `noise_enabled = false` this is exactly [`svgd_step`].
pub fn sgld_r_step(
    ensemble: &ParticleEnsemble,
    target: &dyn Target,
    kernel: &KernelState,
    eps: f64,
    noise_enabled: bool,
    rng: &StepRng,
) -> Result<ParticleEnsemble> {
    let mut next = kernel_drift_update(ensemble, target, kernel, eps, rng)?;
    if noise_enabled {
        next = next
            + sample_repulsion_noise(kernel, eps, ensemble.particle_count(), ensemble.dim(), rng)?;
    }
    ensemble.advance(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{rbf, rbf_grad_first, KernelMode};
    use crate::targets::StandardGaussian;
    use ndarray::array;

    /// Literal double loop over `j` for every particle.
    fn svgd_loop_oracle(z: &Array2<f64>, target: &dyn Target, h: f64, eps: f64) -> Array2<f64> {
        let (k, d) = z.dim();
        let mut out = z.clone();
        for i in 0..k {
            let zi = z.row(i).to_vec();
            let mut phi = vec![0.0; d];
            for j in 0..k {
                let zj = z.row(j).to_vec();
                let kij = rbf(&zj, &zi, h).unwrap();
                let g = target.grad_log_density(&zj).unwrap();
                let rep = rbf_grad_first(&zj, &zi, h).unwrap();
                for c in 0..d {
                    phi[c] += kij * g[c] + rep[c];
                }
            }
            for c in 0..d {
                out[[i, c]] += eps / k as f64 * phi[c];
            }
        }
        out
    }

    #[test]
    fn single_particle_svgd_is_gradient_ascent() {
        let target = StandardGaussian::new(2);
        let ens = ParticleEnsemble::new(array![[1.0, -2.0]]).unwrap();
        let kernel = KernelState::build(ens.particles(), KernelMode::RbfMedian).unwrap();
        let next = svgd_step(&ens, &target, &kernel, 0.1, &StepRng::new(0, 0)).unwrap();
        assert_eq!(next.particles(), array![[1.0 - 0.1, -2.0 + 0.2]]);
        assert_eq!(next.step_index(), 1);
    }

    #[test]
    fn coincident_particles_at_a_stationary_point_stay_put() {
        let target = StandardGaussian::new(2);
        let ens = ParticleEnsemble::new(array![[0.0, 0.0], [0.0, 0.0]]).unwrap();
        let kernel = KernelState::build(ens.particles(), KernelMode::RbfMedian).unwrap();
        let next = svgd_step(&ens, &target, &kernel, 0.5, &StepRng::new(0, 0)).unwrap();
        assert_eq!(next.particles(), ens.particles());
    }

    #[test]
    fn svgd_matches_double_loop() {
        let target = StandardGaussian::new(2);
        let z = array![[0.3, -1.2], [1.4, 0.2], [-0.7, 0.9]];
        let ens = ParticleEnsemble::new(z.clone()).unwrap();
        let kernel = KernelState::build(ens.particles(), KernelMode::RbfMedian).unwrap();
        let h = kernel.bandwidth().unwrap();
        let next = svgd_step(&ens, &target, &kernel, 0.05, &StepRng::new(0, 0)).unwrap();
        let oracle = svgd_loop_oracle(&z, &target, h, 0.05);
        for (a, b) in next.particles().iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sgld_without_noise_is_gradient_ascent() {
        let target = StandardGaussian::new(1);
        let ens = ParticleEnsemble::new(array![[2.0], [-1.0]]).unwrap();
        let next = sgld_step(&ens, &target, 0.25, false, &StepRng::new(3, 0)).unwrap();
        assert_eq!(next.particles(), array![[1.5], [-0.75]]);
    }

    #[test]
    fn sgld_particles_are_independent() {
        let target = StandardGaussian::new(2);
        let rng = StepRng::new(11, 4);
        let a = ParticleEnsemble::new(array![[0.5, 0.5], [1.0, -1.0]]).unwrap();
        let b = ParticleEnsemble::new(array![[0.5, 0.5], [-3.0, 7.0]]).unwrap();
        let c = ParticleEnsemble::new(array![[0.5, 0.5]]).unwrap();
        let na = sgld_step(&a, &target, 0.1, true, &rng).unwrap();
        let nb = sgld_step(&b, &target, 0.1, true, &rng).unwrap();
        let nc = sgld_step(&c, &target, 0.1, true, &rng).unwrap();
        assert_eq!(na.particles().row(0), nb.particles().row(0));
        assert_eq!(na.particles().row(0), nc.particles().row(0));
    }

    #[test]
    fn non_finite_updates_abort() {
        let target = StandardGaussian::new(1);
        let ens = ParticleEnsemble::new(array![[1e308], [0.0]]).unwrap();
        let err = sgld_step(&ens, &target, 1e10, false, &StepRng::new(0, 0)).unwrap_err();
        assert!(
            matches!(err, Error::Numerical(ref m) if m.contains("particle 0")),
            "{err}"
        );
    }

    #[test]
    fn step_size_must_be_positive() {
        let target = StandardGaussian::new(1);
        let ens = ParticleEnsemble::new(array![[1.0]]).unwrap();
        assert!(sgld_step(&ens, &target, 0.0, true, &StepRng::new(0, 0)).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let target = StandardGaussian::new(3);
        let ens = ParticleEnsemble::new(array![[1.0, 2.0]]).unwrap();
        assert!(matches!(
            sgld_step(&ens, &target, 0.1, true, &StepRng::new(0, 0)),
            Err(Error::Argument(_))
        ));
    }
}
