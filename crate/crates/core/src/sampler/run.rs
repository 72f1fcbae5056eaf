use std::time::Instant;

use ndarray::Array2;

use super::step::{sgld_r_step, sgld_step, svgd_step};
use super::{Method, ParticleEnsemble, SamplerConfig, StepRng};
use crate::kernels::KernelState;
use crate::targets::Target;
use crate::trace::{JitterStats, ScalarSummary, Snapshot, TraceMeta, TraceStore};
use crate::{Error, Result};

/// Runs the configured sampler from the target's initial distribution.
///
/// Particle `i` starts from `target.init_particle` fed by its own seeded
/// stream, so runs are reproducible given `config.seed`.
pub fn run(config: &SamplerConfig, target: &dyn Target) -> Result<TraceStore> {
    config.validate()?;
    let (k, d) = (config.particle_count, target.dim());
    let mut init = Array2::zeros((k, d));
    for (i, mut row) in init.rows_mut().into_iter().enumerate() {
        let z = target.init_particle(&mut StepRng::init(config.seed, i));
        if z.len() != d {
            return Err(Error::argument(format!(
                "target `{}` produced an initial particle of dimension {}",
                target.name(),
                z.len()
            )));
        }
        row.iter_mut().zip(z).for_each(|(r, v)| *r = v);
    }
    run_with_init(config, target, init)
}

/// Runs the sampler from explicit initial particles (`K × d`).
///
/// Iteration `t` (1-based) is the state after `t` updates. Snapshots are
/// taken at `burn_in + thin, burn_in + 2·thin, …, ≤ total_iterations`.
pub fn run_with_init(
    config: &SamplerConfig,
    target: &dyn Target,
    init: Array2<f64>,
) -> Result<TraceStore> {
    config.validate()?;
    if init.nrows() != config.particle_count || init.ncols() != target.dim() {
        return Err(Error::argument(format!(
            "initial ensemble is {}×{}, expected {}×{}",
            init.nrows(),
            init.ncols(),
            config.particle_count,
            target.dim()
        )));
    }
    let mut ensemble = ParticleEnsemble::new(init)?;
    let mut trace = TraceStore::new(TraceMeta {
        config_fingerprint: config.fingerprint(),
        seed: config.seed,
        method: config.method.to_string(),
        target: target.name().to_string(),
        particle_count: config.particle_count,
        dim: target.dim(),
        total_iterations: config.total_iterations,
        burn_in: config.burn_in,
        thin: config.thin,
        post_burn_in_start_s: 0.0,
        jitter: JitterStats::default(),
        bandwidth: ScalarSummary::default(),
        context: serde_json::Value::Null,
    });
    let mut jitter = JitterStats::default();
    let mut bandwidth = ScalarSummary::default();

    let clock = Instant::now();
    let mut post_burn_in_start = 0.0;
    for t in 0..config.total_iterations {
        let eps = config.step_size.at(t);
        let rng = StepRng::new(config.seed, t);
        let iteration = t + 1;
        let next = match config.method {
            Method::Sgld => sgld_step(&ensemble, target, eps, config.noise_enabled, &rng),
            Method::Svgd | Method::SgldR => {
                KernelState::build(ensemble.particles(), config.kernel_at(t)).and_then(|kernel| {
                    jitter.push(kernel.jitter_used());
                    if let Some(h) = kernel.bandwidth() {
                        bandwidth.push(h);
                    }
                    if config.method == Method::Svgd {
                        svgd_step(&ensemble, target, &kernel, eps, &rng)
                    } else {
                        sgld_r_step(&ensemble, target, &kernel, eps, config.noise_enabled, &rng)
                    }
                })
            }
        };
        ensemble = next.map_err(|e| Error::Step {
            iteration,
            source: Box::new(e),
        })?;

        if iteration == config.burn_in {
            post_burn_in_start = clock.elapsed().as_secs_f64();
        }
        if iteration > config.burn_in && (iteration - config.burn_in) % config.thin == 0 {
            trace.push(Snapshot {
                iteration,
                wall_s: clock.elapsed().as_secs_f64(),
                particles: ensemble.particles().to_owned(),
            })?;
        }
    }

    let meta = trace.meta_mut();
    meta.post_burn_in_start_s = post_burn_in_start;
    meta.jitter = jitter;
    meta.bandwidth = bandwidth;
    Ok(trace)
}
