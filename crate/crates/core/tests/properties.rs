use ndarray::Array2;
use proptest::prelude::*;
use rand::RngCore;

use sgldr::diagnostics::{ess_univariate, mode_coverage, moment_error, Transform};
use sgldr::kernels::{gram_matrix, median_bandwidth, psd_factor, rbf, rbf_grad_first};
use sgldr::sampler::{sgld_r_step, sgld_step, svgd_drift, svgd_step, StepRng};
use sgldr::targets::{GaussianGridMixture, StandardGaussian};
use sgldr::trace::{JitterStats, ScalarSummary, Snapshot, TraceMeta};
use sgldr::{KernelMode, KernelState, ParticleEnsemble, Result, Target, TraceStore};

fn ensemble(max_k: usize, max_d: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_k, 1..=max_d).prop_flat_map(|(k, d)| {
        prop::collection::vec(-3.0f64..3.0, k * d)
            .prop_map(move |v| Array2::from_shape_vec((k, d), v).unwrap())
    })
}

fn meta(k: usize, d: usize) -> TraceMeta {
    TraceMeta {
        config_fingerprint: String::new(),
        seed: 0,
        method: "sgld_r".into(),
        target: "test".into(),
        particle_count: k,
        dim: d,
        total_iterations: 0,
        burn_in: 0,
        thin: 1,
        post_burn_in_start_s: 0.0,
        jitter: JitterStats::default(),
        bandwidth: ScalarSummary::default(),
        context: serde_json::Value::Null,
    }
}

fn trace_of(snaps: &[Array2<f64>]) -> TraceStore {
    let (k, d) = snaps[0].dim();
    let mut t = TraceStore::new(meta(k, d));
    for (i, s) in snaps.iter().enumerate() {
        t.push(Snapshot {
            iteration: i as u64 + 1,
            wall_s: i as f64,
            particles: s.clone(),
        })
        .unwrap();
    }
    t
}

/// Log density flat everywhere.
struct Flat(usize);

impl Target for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn name(&self) -> &str {
        "flat"
    }
    fn log_density(&self, _: &[f64]) -> Result<f64> {
        Ok(0.0)
    }
    fn grad_log_density(&self, _: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0])
    }
}

fn dist(z: &Array2<f64>) -> f64 {
    (&z.row(0) - &z.row(1)).mapv(|v| v * v).sum().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rbf_gradient_is_antisymmetric(
        a in prop::collection::vec(-3.0f64..3.0, 3),
        b in prop::collection::vec(-3.0f64..3.0, 3),
        h in 0.01f64..10.0,
    ) {
        let ab = rbf_grad_first(&a, &b, h).unwrap();
        let ba = rbf_grad_first(&b, &a, h).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert_eq!(*x, -*y);
        }
        prop_assert_eq!(rbf(&a, &b, h).unwrap(), rbf(&b, &a, h).unwrap());
    }

    #[test]
    fn gram_factors_with_small_jitter(z in ensemble(8, 4), dup in any::<bool>()) {
        let mut z = z;
        if dup {
            let first = z.row(0).to_owned();
            z.row_mut(1).assign(&first);
        }
        let gram = gram_matrix(z.view(), median_bandwidth(z.view()).unwrap()).unwrap();
        let (l, jitter) = psd_factor(&gram).unwrap();
        prop_assert!(jitter <= 1e-8);
        let rebuilt = l.dot(&l.t());
        for (x, y) in rebuilt.iter().zip(gram.iter()) {
            prop_assert!((x - y).abs() <= 1e-7);
        }
    }

    #[test]
    fn matrix_drift_matches_double_loop(z in ensemble(6, 3), h in 0.1f64..5.0) {
        let target = GaussianGridMixture::grid3x3();
        let z = z.slice(ndarray::s![.., ..1]).to_owned();
        let z = ndarray::concatenate![ndarray::Axis(1), z, z.mapv(|v| 0.5 - v)];
        let (k, d) = z.dim();
        let grads = Array2::from_shape_fn((k, d), |(i, c)| target.grad_log_density(&z.row(i).to_vec()).unwrap()[c]);
        let kernel = KernelState::build(z.view(), KernelMode::RbfFixed { h }).unwrap();
        let drift = svgd_drift(z.view(), grads.view(), &kernel);
        for i in 0..k {
            let zi = z.row(i).to_vec();
            let mut acc = vec![0.0; d];
            for j in 0..k {
                let zj = z.row(j).to_vec();
                let kij = rbf(&zj, &zi, h).unwrap();
                let gk = rbf_grad_first(&zj, &zi, h).unwrap();
                for c in 0..d {
                    acc[c] += kij * grads[[j, c]] + gk[c];
                }
            }
            for c in 0..d {
                prop_assert!((drift[[i, c]] - acc[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn repulsion_pushes_apart_on_flat_target(
        a in prop::collection::vec(-2.0f64..2.0, 2),
        offset in prop::collection::vec(0.05f64..1.5, 2),
        eps in 1e-3f64..0.5,
    ) {
        let z = Array2::from_shape_vec((2, 2), vec![a[0], a[1], a[0] + offset[0], a[1] - offset[1]]).unwrap();
        let ens = ParticleEnsemble::new(z.clone()).unwrap();
        let kernel = KernelState::build(z.view(), KernelMode::RbfMedian).unwrap();
        let next = sgld_r_step(&ens, &Flat(2), &kernel, eps, false, &StepRng::new(0, 0)).unwrap();
        prop_assert!(dist(&next.into_particles()) > dist(&z));
    }

    #[test]
    fn degeneracies_hold_per_step(z in ensemble(5, 3), seed in any::<u64>(), eps in 1e-3f64..0.3) {
        let target = StandardGaussian::new(z.ncols());
        let k = z.nrows();
        let ens = ParticleEnsemble::new(z.clone()).unwrap();
        let rng = StepRng::new(seed, 3);
        let kernel = KernelState::build(z.view(), KernelMode::RbfMedian).unwrap();
        prop_assert_eq!(
            sgld_r_step(&ens, &target, &kernel, eps, false, &rng).unwrap(),
            svgd_step(&ens, &target, &kernel, eps, &rng).unwrap()
        );
        let ident = KernelState::identity(k);
        prop_assert_eq!(
            sgld_r_step(&ens, &target, &ident, eps, true, &rng).unwrap(),
            sgld_step(&ens, &target, eps / k as f64, true, &rng).unwrap()
        );
        let one = ParticleEnsemble::new(z.slice(ndarray::s![..1, ..]).to_owned()).unwrap();
        let k1 = KernelState::build(one.particles(), KernelMode::RbfMedian).unwrap();
        prop_assert_eq!(
            sgld_r_step(&one, &target, &k1, eps, true, &rng).unwrap(),
            sgld_step(&one, &target, eps, true, &rng).unwrap()
        );
    }

    #[test]
    fn ess_is_affine_invariant(v in prop::collection::vec(-5.0f64..5.0, 20..200), a in 0.1f64..10.0, b in -10.0f64..10.0) {
        let w: Vec<f64> = v.iter().map(|x| a * x + b).collect();
        let (e1, e2) = (ess_univariate(&v).unwrap(), ess_univariate(&w).unwrap());
        prop_assert!((e1 - e2).abs() <= 1e-6 * e1.max(1.0));
    }

    #[test]
    fn moment_error_ignores_snapshot_order(snaps in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 6), 2..12)) {
        let arrays: Vec<Array2<f64>> = snaps.iter().map(|v| Array2::from_shape_vec((3, 2), v.clone()).unwrap()).collect();
        let mut reversed = arrays.clone();
        reversed.reverse();
        let truth = [0.0, 0.0];
        let a = moment_error(&trace_of(&arrays), &truth, Transform::Identity).unwrap();
        let b = moment_error(&trace_of(&reversed), &truth, Transform::Identity).unwrap();
        prop_assert!((a.error - b.error).abs() <= 1e-12);
    }

    #[test]
    fn coverage_is_monotone_in_radius(z in prop::collection::vec(-3.0f64..3.0, 40), r1 in 0.01f64..2.0, r2 in 0.01f64..2.0) {
        let centers: Vec<Vec<f64>> = GaussianGridMixture::grid3x3().centers().iter().map(|c| c.to_vec()).collect();
        let t = trace_of(&[Array2::from_shape_vec((20, 2), z).unwrap()]);
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        prop_assert!(mode_coverage(&t, &centers, lo).unwrap() <= mode_coverage(&t, &centers, hi).unwrap());
    }

    #[test]
    fn mog_density_is_symmetric(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let mog = GaussianGridMixture::grid3x3();
        let base = mog.log_density(&[x, y]).unwrap();
        for p in [[-x, -y], [y, x], [-x, y], [x, -y]] {
            prop_assert!((mog.log_density(&p).unwrap() - base).abs() <= 1e-12);
        }
    }
}

#[test]
fn init_streams_do_not_depend_on_particle_count() {
    let mut a = StepRng::init(7, 2);
    let mut b = StepRng::init(7, 2);
    assert_eq!(a.next_u64(), b.next_u64());
    let mut other = StepRng::new(7, 0).particle(2);
    assert_ne!(StepRng::init(7, 2).next_u64(), other.next_u64());
}
