use std::hint::black_box;
use std::path::PathBuf;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sgldr::bnn::{load_uci_csv, BnnTarget};
use sgldr::sampler::{sgld_r_step, sgld_step, StepRng};
use sgldr::targets::GaussianGridMixture;
use sgldr::{KernelMode, KernelState, ParticleEnsemble, Target};

fn particles(k: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((k, d), |_| {
        let e: f64 = StandardNormal.sample(&mut rng);
        e
    })
}

fn kernel_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel_build");
    for k in [10, 50, 100] {
        let z = particles(k, 2, 1);
        group.bench_with_input(BenchmarkId::from_parameter(k), &z, |b, z| {
            b.iter(|| KernelState::build(black_box(z.view()), KernelMode::RbfMedian).unwrap())
        });
    }
    group.finish();
}

fn mog_steps(c: &mut Criterion) {
    let target = GaussianGridMixture::grid3x3();
    let mut group = c.benchmark_group("mog_step");
    for k in [20, 100] {
        let ens = ParticleEnsemble::new(particles(k, 2, 2)).unwrap();
        let rng = StepRng::new(0, 0);
        group.bench_with_input(BenchmarkId::new("sgld_r", k), &ens, |b, ens| {
            b.iter(|| {
                let kernel = KernelState::build(ens.particles(), KernelMode::RbfMedian).unwrap();
                sgld_r_step(ens, &target, &kernel, 0.1, true, &rng).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("sgld", k), &ens, |b, ens| {
            b.iter(|| sgld_step(ens, &target, 0.01, true, &rng).unwrap())
        });
    }
    group.finish();
}

fn bnn_gradient(c: &mut Criterion) {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/boston_housing.csv");
    let data = Arc::new(load_uci_csv(&path, "MEDV", 0, 0.1).unwrap());
    let target = BnnTarget::new(data.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = target.init_particle(&mut rng);
    let batch: Vec<usize> = data.train()[..100].to_vec();
    c.bench_function("bnn_minibatch_gradient_100", |b| {
        b.iter(|| {
            target
                .log_posterior_grad_minibatch(black_box(&params), &batch)
                .unwrap()
        })
    });
    let mut init = Array2::zeros((20, target.dim()));
    for mut row in init.rows_mut() {
        row.assign(&ndarray::Array1::from(target.init_particle(&mut rng)));
    }
    let ens = ParticleEnsemble::new(init).unwrap();
    c.bench_function("bnn_sgld_r_step_20", |b| {
        b.iter(|| {
            let kernel = KernelState::build(ens.particles(), KernelMode::RbfMedian).unwrap();
            sgld_r_step(&ens, &target, &kernel, 1e-4, true, &StepRng::new(0, 0)).unwrap()
        })
    });
}

criterion_group!(benches, kernel_build, mog_steps, bnn_gradient);
criterion_main!(benches);
