//! RBF kernel machinery for the interacting samplers.
//!
//! The kernel is `k(z, z') = exp(−‖z − z'‖² / h)`. Note the exponent has no
//! factor 2: for a given `h` this kernel is narrower than the
//! `exp(−‖z − z'‖² / 2h)` convention used elsewhere.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Jitter values tried in order when factorizing a Gram matrix.
pub const JITTER_LADDER: [f64; 5] = [0.0, 1e-10, 1e-8, 1e-6, 1e-4];

/// Bandwidth floor used when every particle coincides.
pub const MIN_BANDWIDTH: f64 = 1e-8;

/// How the kernel between particles is formed at each step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum KernelMode {
    /// RBF with the median heuristic recomputed every step.
    #[default]
    RbfMedian,
    /// RBF with a fixed bandwidth.
    RbfFixed { h: f64 },
    /// `K̄ = I`: no interaction, which reduces SGLD+R to parallel SGLD.
    Identity,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::argument(format!(
            "kernel bandwidth must be positive, got {h}"
        )));
    }
    Ok(())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rbf(z: &[f64], z_prime: &[f64], h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    if z.len() != z_prime.len() {
        return Err(Error::argument(format!(
            "rbf: dimension mismatch ({} vs {})",
            z.len(),
            z_prime.len()
        )));
    }
    Ok((-sq_dist(z, z_prime) / h).exp())
}

/// `∇_{z_j} k(z_j, z_i) = −(2/h)(z_j − z_i) k(z_j, z_i)`, the gradient in the
/// first argument. Summed over `j` this is the repulsive force on `z_i`.
pub fn rbf_grad_first(z_j: &[f64], z_i: &[f64], h: f64) -> Result<Vec<f64>> {
    let k = rbf(z_j, z_i, h)?;
    Ok(z_j
        .iter()
        .zip(z_i)
        .map(|(a, b)| -(2.0 / h) * (a - b) * k)
        .collect())
}

/// `K̄_ij = k(z_i, z_j)` for the rows of `particles`.
pub fn gram_matrix(particles: ArrayView2<'_, f64>, h: f64) -> Result<Array2<f64>> {
    check_bandwidth(h)?;
    let n = particles.nrows();
    if n == 0 {
        return Err(Error::argument("gram matrix of an empty ensemble"));
    }
    let rows: Vec<Vec<f64>> = particles.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut gram = Array2::zeros((n, n));
    for i in 0..n {
        gram[[i, i]] = 1.0;
        for j in 0..i {
            let k = (-sq_dist(&rows[i], &rows[j]) / h).exp();
            gram[[i, j]] = k;
            gram[[j, i]] = k;
        }
    }
    Ok(gram)
}

/// Median heuristic `h = med² / ln(K + 1)`.
///
/// `med` is the median of the `K(K−1)/2` pairwise Euclidean distances; for an
/// even count the lower middle value is taken. The result is floored at
/// [`MIN_BANDWIDTH`].
pub fn median_bandwidth(particles: ArrayView2<'_, f64>) -> Result<f64> {
    let n = particles.nrows();
    if n < 2 {
        return Err(Error::argument(format!(
            "median bandwidth needs at least 2 particles, got {n}"
        )));
    }
    let rows: Vec<Vec<f64>> = particles.rows().into_iter().map(|r| r.to_vec()).collect();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            dists.push(sq_dist(&rows[i], &rows[j]).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let med = dists[(dists.len() - 1) / 2];
    Ok((med * med / ((n + 1) as f64).ln()).max(MIN_BANDWIDTH))
}

/// Lower-triangular `L` with `L Lᵀ = A` or `None` if a pivot is not positive.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0 && diag.is_finite()) {
            return None;
        }
        let pivot = diag.sqrt();
        l[[j, j]] = pivot;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / pivot;
        }
    }
    Some(l)
}

/// Cholesky factor of `gram + jitter·I`, escalating `jitter` through
/// [`JITTER_LADDER`] until the factorization succeeds.
pub fn psd_factor(gram: &Array2<f64>) -> Result<(Array2<f64>, f64)> {
    if !gram.is_square() {
        return Err(Error::argument("psd_factor needs a square matrix"));
    }
    for &jitter in &JITTER_LADDER {
        let mut a = gram.clone();
        if jitter > 0.0 {
            a.diag_mut().iter_mut().for_each(|v| *v += jitter);
        }
        if let Some(l) = cholesky(&a) {
            return Ok((l, jitter));
        }
    }
    Err(Error::NotPositiveDefinite {
        size: gram.nrows(),
        max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        gram: gram.iter().copied().collect(),
    })
}

/// Kernel quantities for one sampler step, built from the current ensemble.
#[derive(Debug, Clone)]
pub struct KernelState {
    /// `None` for the identity kernel.
    bandwidth: Option<f64>,
    gram: Array2<f64>,
    factor: Array2<f64>,
    jitter: f64,
}

impl KernelState {
    pub fn build(particles: ArrayView2<'_, f64>, mode: KernelMode) -> Result<Self> {
        let n = particles.nrows();
        if n == 0 {
            return Err(Error::argument("kernel of an empty ensemble"));
        }
        let h = match mode {
            KernelMode::Identity => return Ok(Self::identity(n)),
            KernelMode::RbfFixed { h } => h,
            // A single particle only ever sees k(z, z) = 1.
            KernelMode::RbfMedian if n < 2 => 1.0,
            KernelMode::RbfMedian => median_bandwidth(particles)?,
        };
        Self::from_gram(Some(h), gram_matrix(particles, h)?)
    }

    pub fn identity(n: usize) -> Self {
        KernelState {
            bandwidth: None,
            gram: Array2::eye(n),
            factor: Array2::eye(n),
            jitter: 0.0,
        }
    }

    /// Wraps an explicit Gram matrix. `bandwidth` is only used for the
    /// repulsion term and may be `None` to disable it.
    pub fn from_gram(bandwidth: Option<f64>, gram: Array2<f64>) -> Result<Self> {
        if let Some(h) = bandwidth {
            check_bandwidth(h)?;
        }
        let (factor, jitter) = psd_factor(&gram)?;
        Ok(KernelState {
            bandwidth,
            gram,
            factor,
            jitter,
        })
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn gram(&self) -> &Array2<f64> {
        &self.gram
    }

    /// Lower-triangular `L` with `L Lᵀ = gram + jitter·I`.
    pub fn psd_factor(&self) -> &Array2<f64> {
        &self.factor
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    pub fn particle_count(&self) -> usize {
        self.gram.nrows()
    }

    /// `Γ̄_i = Σ_j ∇_{z_j} k(z_j, z_i) = (2/h) Σ_j k_ij (z_i − z_j)`.
    ///
    /// Zero for the identity kernel.
    pub fn repulsion(&self, particles: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros(particles.raw_dim());
        let Some(h) = self.bandwidth else {
            return out;
        };
        let scale = 2.0 / h;
        let n = particles.nrows();
        for i in 0..n {
            let zi = particles.row(i);
            let mut acc = out.row_mut(i);
            for j in 0..n {
                let k = self.gram[[i, j]];
                for ((a, &xi), &xj) in acc.iter_mut().zip(zi.iter()).zip(particles.row(j).iter()) {
                    *a += k * (xi - xj);
                }
            }
            acc.iter_mut().for_each(|a| *a *= scale);
        }
        out
    }

    /// `K̄ · G` for a `K × d` array of per-particle gradients.
    pub fn smooth(&self, grads: ArrayView2<'_, f64>) -> Array2<f64> {
        self.gram.dot(&grads)
    }
}

/// Index bijection between the dimension-major layout (all particles'
/// coordinate 0, then coordinate 1, …) and the particle-major layout
/// (`z_1, …, z_K` concatenated) of a `K × d` ensemble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSpec {
    particle_count: usize,
    dim: usize,
    /// `index_map[dimension_major] = particle_major`.
    index_map: Vec<usize>,
}

pub fn build_permutation(particle_count: usize, dim: usize) -> PermutationSpec {
    assert!(particle_count >= 1 && dim >= 1);
    let mut index_map = vec![0; particle_count * dim];
    for c in 0..dim {
        for p in 0..particle_count {
            index_map[c * particle_count + p] = p * dim + c;
        }
    }
    PermutationSpec {
        particle_count,
        dim,
        index_map,
    }
}

impl PermutationSpec {
    pub fn len(&self) -> usize {
        self.index_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_map.is_empty()
    }

    pub fn particle_count(&self) -> usize {
        self.particle_count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.index_map.len()];
        for (src, &dst) in self.index_map.iter().enumerate() {
            inv[dst] = src;
        }
        inv
    }

    /// Reorders a dimension-major vector into particle-major order (`P v`).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.len());
        let mut out = vec![0.0; v.len()];
        for (src, &dst) in self.index_map.iter().enumerate() {
            out[dst] = v[src];
        }
        out
    }

    /// Dense `P` with `P[index_map[i], i] = 1`.
    pub fn matrix(&self) -> Array2<f64> {
        let n = self.len();
        let mut p = Array2::zeros((n, n));
        for (src, &dst) in self.index_map.iter().enumerate() {
            p[[dst, src]] = 1.0;
        }
        p
    }
}

/// Dense `Kd × Kd` kernel acting on particle-major flattened ensembles:
/// `P · blockdiag(K̄, …, K̄) · Pᵀ` with `d` copies of `K̄`.
///
/// Entry `(p·d + c, q·d + c')` equals `K̄_pq` when `c = c'` and 0 otherwise.
/// The samplers never build this matrix; it exists to check the
/// `K × d` array formulation against.
pub fn build_big_k(gram: &Array2<f64>, dim: usize) -> Array2<f64> {
    let k = gram.nrows();
    let mut block = Array2::zeros((k * dim, k * dim));
    for c in 0..dim {
        block
            .slice_mut(ndarray::s![c * k..(c + 1) * k, c * k..(c + 1) * k])
            .assign(gram);
    }
    let p = build_permutation(k, dim).matrix();
    p.dot(&block).dot(&p.t())
}

/// Flattens a `K × d` array in particle-major order.
pub fn flatten_particle_major(a: ArrayView2<'_, f64>) -> Vec<f64> {
    a.axis_iter(Axis(0)).flat_map(|r| r.to_vec()).collect()
}
