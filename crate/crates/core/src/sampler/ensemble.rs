use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// `K` particles in `d` dimensions (row `i` is `z_i`) and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    particles: Array2<f64>,
    step: u64,
}

impl ParticleEnsemble {
    pub fn new(particles: Array2<f64>) -> Result<Self> {
        Self::at_step(particles, 0)
    }

    pub fn at_step(particles: Array2<f64>, step: u64) -> Result<Self> {
        if particles.nrows() == 0 || particles.ncols() == 0 {
            return Err(Error::argument(format!(
                "ensemble needs K ≥ 1 and d ≥ 1, got {}×{}",
                particles.nrows(),
                particles.ncols()
            )));
        }
        if let Some(i) = first_non_finite_row(particles.view()) {
            return Err(Error::numerical(format!(
                "particle {i} has non-finite coordinates"
            )));
        }
        Ok(ParticleEnsemble { particles, step })
    }

    pub fn particles(&self) -> ArrayView2<'_, f64> {
        self.particles.view()
    }

    pub fn into_particles(self) -> Array2<f64> {
        self.particles
    }

    pub fn particle_count(&self) -> usize {
        self.particles.nrows()
    }

    pub fn dim(&self) -> usize {
        self.particles.ncols()
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    /// Accepts a proposed next state, rejecting any non-finite entry.
    pub(crate) fn advance(&self, proposed: Array2<f64>) -> Result<Self> {
        debug_assert_eq!(proposed.raw_dim(), self.particles.raw_dim());
        if let Some(i) = first_non_finite_row(proposed.view()) {
            return Err(Error::numerical(format!(
                "update produced non-finite values for particle {i}"
            )));
        }
        Ok(ParticleEnsemble {
            particles: proposed,
            step: self.step + 1,
        })
    }
}

fn first_non_finite_row(a: ArrayView2<'_, f64>) -> Option<usize> {
    a.rows()
        .into_iter()
        .position(|r| r.iter().any(|v| !v.is_finite()))
}
