use super::{check_dim, log_sum_exp, softmax, Target};
use crate::{Error, Result};

/// Equally weighted mixture of axis-aligned 2-D Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianGridMixture {
    centers: Vec<[f64; 2]>,
    covariance_diagonal: [f64; 2],
}

impl GaussianGridMixture {
    pub fn new(centers: Vec<[f64; 2]>, covariance_diagonal: [f64; 2]) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::config("Gaussian mixture needs at least one center"));
        }
        if covariance_diagonal
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::config("covariance diagonal must be positive"));
        }
        Ok(GaussianGridMixture {
            centers,
            covariance_diagonal,
        })
    }

    /// Nine modes on `{−2, 0, 2}²` with covariance `diag(0.1, 0.1)`.
    pub fn grid3x3() -> Self {
        let ticks = [-2.0, 0.0, 2.0];
        let centers = ticks
            .iter()
            .flat_map(|&x| ticks.iter().map(move |&y| [x, y]))
            .collect();
        Self::new(centers, [0.1, 0.1]).expect("valid grid")
    }

    pub fn centers(&self) -> &[[f64; 2]] {
        &self.centers
    }

    pub fn covariance_diagonal(&self) -> [f64; 2] {
        self.covariance_diagonal
    }

    /// Mean of the mixture.
    pub fn mean(&self) -> [f64; 2] {
        let n = self.centers.len() as f64;
        let sx: f64 = self.centers.iter().map(|c| c[0]).sum();
        let sy: f64 = self.centers.iter().map(|c| c[1]).sum();
        [sx / n, sy / n]
    }

    fn logits(&self, z: &[f64]) -> Vec<f64> {
        let [vx, vy] = self.covariance_diagonal;
        self.centers
            .iter()
            .map(|c| -0.5 * ((z[0] - c[0]).powi(2) / vx + (z[1] - c[1]).powi(2) / vy))
            .collect()
    }
}

impl Target for GaussianGridMixture {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "mog3x3"
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self, z)?;
        Ok(log_sum_exp(&self.logits(z)))
    }

    fn grad_log_density(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self, z)?;
        let resp = softmax(&self.logits(z));
        let [vx, vy] = self.covariance_diagonal;
        let mut g = [0.0; 2];
        for (r, c) in resp.iter().zip(&self.centers) {
            g[0] += r * (c[0] - z[0]) / vx;
            g[1] += r * (c[1] - z[1]) / vy;
        }
        Ok(g.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let mog = GaussianGridMixture::grid3x3();
        assert_eq!(mog.centers().len(), 9);
        for x in [-2.0, 0.0, 2.0] {
            for y in [-2.0, 0.0, 2.0] {
                assert!(mog.centers().contains(&[x, y]));
            }
        }
        assert_eq!(mog.covariance_diagonal(), [0.1, 0.1]);
        assert_eq!(mog.mean(), [0.0, 0.0]);
    }

    #[test]
    fn symmetric_values() {
        let mog = GaussianGridMixture::grid3x3();
        let a = mog.log_density(&[2.0, 2.0]).unwrap();
        let b = mog.log_density(&[-2.0, -2.0]).unwrap();
        assert!((a - b).abs() < 1e-12);
        let p = [0.37, -1.21];
        let base = mog.log_density(&p).unwrap();
        for q in [[-p[0], -p[1]], [p[1], p[0]], [-p[1], -p[0]]] {
            assert!((mog.log_density(&q).unwrap() - base).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_is_stationary() {
        let mog = GaussianGridMixture::grid3x3();
        let g = mog.grad_log_density(&[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15), "{g:?}");
    }
}
