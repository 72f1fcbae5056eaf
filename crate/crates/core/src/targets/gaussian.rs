use super::{check_dim, Target};
use crate::Result;

/// `N(0, I_d)` with the unnormalized convention `log π(z) = −½‖z‖²`.
#[derive(Debug, Clone)]
pub struct StandardGaussian {
    dim: usize,
}

impl StandardGaussian {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        StandardGaussian { dim }
    }
}

impl Target for StandardGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "gauss-std"
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        check_dim(self, z)?;
        Ok(-0.5 * z.iter().map(|v| v * v).sum::<f64>())
    }

    fn grad_log_density(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self, z)?;
        Ok(z.iter().map(|v| -v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_has_zero_log_density() {
        assert_eq!(
            StandardGaussian::new(3).log_density(&[0.0; 3]).unwrap(),
            0.0
        );
    }

    #[test]
    fn gradient_is_negated_point() {
        let g = StandardGaussian::new(2);
        assert_eq!(g.grad_log_density(&[1.0, -2.0]).unwrap(), vec![-1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_argument_error() {
        let g = StandardGaussian::new(2);
        assert!(matches!(
            g.log_density(&[1.0]),
            Err(crate::Error::Argument(_))
        ));
        assert!(g.grad_log_density(&[1.0, 2.0, 3.0]).is_err());
    }
}
