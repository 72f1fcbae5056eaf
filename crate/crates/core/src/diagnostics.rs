//! Sampler comparison metrics: effective sample size, ESS per second,
//! moment-estimation error and mode coverage.

use serde::{Deserialize, Serialize};

use crate::trace::TraceStore;
use crate::{Error, Result};

/// Minimum series length accepted by [`ess_univariate`].
pub const MIN_ESS_LENGTH: usize = 10;

/// Effective sample size of one scalar chain.
///
/// `n / (1 + 2 Σ_k ρ̂_k)`, where the autocorrelation sum is truncated with
/// Geyer's initial positive sequence: consecutive pairs `ρ̂_{2m} + ρ̂_{2m+1}`
/// are accumulated while they stay positive. The result is clipped to
/// `[1, n]`; a constant series yields 1.
pub fn ess_univariate(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(Error::argument(format!(
            "ESS needs at least {MIN_ESS_LENGTH} values, got {n}"
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("ESS of a series with non-finite values"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let c0 = autocov(0);
    if series.iter().all(|v| *v == series[0]) || c0.is_nan() || c0 <= 0.0 {
        return Ok(1.0);
    }

    // τ = −1 + 2 Σ_m Γ_m with Γ_m = ρ_{2m} + ρ_{2m+1}, ρ_0 = 1.
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = autocov(2 * m) / c0 + autocov(2 * m + 1) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    Ok((n as f64 / tau).clamp(1.0, n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssReport {
    /// ESS of each particle's first-coordinate series.
    pub per_particle_ess: Vec<f64>,
    pub mean_ess: f64,
    pub min_ess: f64,
    /// `mean_ess` over post-burn-in wall-clock seconds.
    pub ess_per_second: f64,
    /// Set when at least one series had zero variance.
    pub degenerate: bool,
}

/// ESS on the first coordinate of every particle's snapshot series,
/// averaged across particles.
pub fn ess_report(trace: &TraceStore) -> Result<EssReport> {
    let mut per_particle = Vec::with_capacity(trace.particle_count());
    let mut degenerate = false;
    for p in 0..trace.particle_count() {
        let series = trace.particle_series(p, 0);
        let first = series.first().copied().unwrap_or_default();
        degenerate |= series.iter().all(|v| *v == first);
        per_particle.push(ess_univariate(&series)?);
    }
    let mean_ess = per_particle.iter().sum::<f64>() / per_particle.len() as f64;
    let min_ess = per_particle.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = trace.post_burn_in_seconds();
    let ess_per_second = if secs > 0.0 {
        mean_ess / secs
    } else {
        f64::INFINITY
    };
    Ok(EssReport {
        per_particle_ess: per_particle,
        mean_ess,
        min_ess,
        ess_per_second,
        degenerate,
    })
}

/// Map applied to each sample before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// `z = exp(y)`, for traces sampled in log space.
    Exp,
}

impl Transform {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Exp => v.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentErrorReport {
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
    /// Euclidean norm of `estimate − truth`.
    pub error: f64,
}

/// Mean of `transform(z)` over every particle of every snapshot, compared
/// to `truth`.
pub fn moment_error(
    trace: &TraceStore,
    truth: &[f64],
    transform: Transform,
) -> Result<MomentErrorReport> {
    if trace.is_empty() {
        return Err(Error::argument("moment error of an empty trace"));
    }
    if truth.len() != trace.dim() {
        return Err(Error::argument(format!(
            "truth has dimension {}, trace has {}",
            truth.len(),
            trace.dim()
        )));
    }
    let mut sum = vec![0.0; trace.dim()];
    let mut count = 0usize;
    for snap in trace.samples() {
        for row in snap.rows() {
            for (s, v) in sum.iter_mut().zip(row.iter()) {
                *s += transform.apply(*v);
            }
            count += 1;
        }
    }
    let estimate: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    let error = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        .sqrt();
    Ok(MomentErrorReport {
        estimate,
        truth: truth.to_vec(),
        error,
    })
}

/// Number of `centers` with at least one final-snapshot particle within
/// Euclidean distance `radius`.
pub fn mode_coverage(trace: &TraceStore, centers: &[Vec<f64>], radius: f64) -> Result<usize> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::argument(format!(
            "coverage radius must be positive, got {radius}"
        )));
    }
    let Some(last) = trace.last() else {
        return Ok(0);
    };
    let r2 = radius * radius;
    Ok(centers
        .iter()
        .filter(|c| {
            last.rows().into_iter().any(|z| {
                z.iter()
                    .zip(c.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    <= r2
            })
        })
        .count())
}

/// Running estimates of `E[X]` and `E[X²]` (per coordinate, after
/// `transform`) pooled over all particles of the snapshots seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    pub iterations: Vec<u64>,
    pub mean: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

pub fn running_moments(trace: &TraceStore, transform: Transform) -> Result<RunningMoments> {
    if trace.is_empty() {
        return Err(Error::argument("running moments of an empty trace"));
    }
    let d = trace.dim();
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut n = 0usize;
    let mut out = RunningMoments {
        iterations: Vec::new(),
        mean: Vec::new(),
        second_moment: Vec::new(),
    };
    for snap in trace.snapshots() {
        for row in snap.particles.rows() {
            for c in 0..d {
                let v = transform.apply(row[c]);
                s1[c] += v;
                s2[c] += v * v;
            }
            n += 1;
        }
        out.iterations.push(snap.iteration);
        out.mean.push(s1.iter().map(|s| s / n as f64).collect());
        out.second_moment
            .push(s2.iter().map(|s| s / n as f64).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{test_meta, Snapshot};
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn trace_of(snaps: Vec<Array2<f64>>) -> TraceStore {
        let (k, d) = snaps[0].dim();
        let mut t = TraceStore::new(test_meta(k, d));
        for (i, p) in snaps.into_iter().enumerate() {
            t.push(Snapshot {
                iteration: i as u64 + 1,
                wall_s: i as f64,
                particles: p,
            })
            .unwrap();
        }
        t
    }

    #[test]
    fn constant_series_has_unit_ess() {
        assert_eq!(ess_univariate(&[3.0; 50]).unwrap(), 1.0);
    }

    #[test]
    fn short_series_rejected() {
        assert!(ess_univariate(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn white_noise_ess_is_close_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ess = ess_univariate(&x).unwrap();
        assert!((0.85 * 5000.0..=1.15 * 5000.0).contains(&ess), "{ess}");
    }

    #[test]
    fn ess_is_affine_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut x = vec![0.0f64; 2000];
        for t in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[t] = 0.7 * x[t - 1] + e;
        }
        let y: Vec<f64> = x.iter().map(|v| -3.0 * v + 11.0).collect();
        let (a, b) = (ess_univariate(&x).unwrap(), ess_univariate(&y).unwrap());
        assert!((a - b).abs() < 1e-8 * a, "{a} vs {b}");
    }

    #[test]
    fn moment_error_examples() {
        let t = trace_of(vec![
            array![[1.0, 2.0], [1.0, 2.0]],
            array![[1.0, 2.0], [1.0, 2.0]],
        ]);
        let r = moment_error(&t, &[1.0, 2.0], Transform::Identity).unwrap();
        assert_eq!(r.error, 0.0);
        let r = moment_error(&t, &[0.0, 0.0], Transform::Identity).unwrap();
        assert!((r.error - 5f64.sqrt()).abs() < 1e-15);
        let r = moment_error(&t, &[1f64.exp(), 2f64.exp()], Transform::Exp).unwrap();
        assert!(r.error < 1e-12);
        assert!(moment_error(&t, &[0.0], Transform::Identity).is_err());
    }

    #[test]
    fn moment_error_of_empty_trace_fails() {
        let t = TraceStore::new(test_meta(1, 1));
        assert!(moment_error(&t, &[0.0], Transform::Identity).is_err());
    }

    #[test]
    fn coverage_examples() {
        let grid: Vec<Vec<f64>> = [-2.0, 0.0, 2.0]
            .iter()
            .flat_map(|&x| [-2.0, 0.0, 2.0].iter().map(move |&y| vec![x, y]))
            .collect();
        let on_centers = Array2::from_shape_vec((9, 2), grid.concat()).unwrap();
        assert_eq!(
            mode_coverage(&trace_of(vec![on_centers]), &grid, 0.5).unwrap(),
            9
        );
        let origin = trace_of(vec![Array2::zeros((5, 2))]);
        assert_eq!(mode_coverage(&origin, &grid, 0.5).unwrap(), 1);
        assert!(mode_coverage(&origin, &grid, 0.0).is_err());
    }

    #[test]
    fn running_moments_accumulate() {
        let t = trace_of(vec![array![[1.0], [3.0]], array![[5.0], [7.0]]]);
        let r = running_moments(&t, Transform::Identity).unwrap();
        assert_eq!(r.iterations, vec![1, 2]);
        assert_eq!(r.mean, vec![vec![2.0], vec![4.0]]);
        assert_eq!(r.second_moment, vec![vec![5.0], vec![21.0]]);
    }
}
