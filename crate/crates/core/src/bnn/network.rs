use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::RngCore;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::data::RegressionDataset;
use crate::targets::{check_dim, Target};
use crate::{Error, Result};

pub const HIDDEN_UNITS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 100;

const PRECISION_SHAPE: f64 = 1.0;
const PRECISION_RATE: f64 = 0.1;

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BnnLayout {
    inputs: usize,
    hidden: usize,
}

impl BnnLayout {
    pub fn new(inputs: usize) -> Self {
        Self::with_hidden(inputs, HIDDEN_UNITS)
    }

    pub fn with_hidden(inputs: usize, hidden: usize) -> Self {
        assert!(inputs >= 1 && hidden >= 1);
        BnnLayout { inputs, hidden }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// `d_in·H + H + H + 1 + 1`.
    pub fn len(&self) -> usize {
        self.inputs * self.hidden + 2 * self.hidden + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn b1(&self) -> usize {
        self.inputs * self.hidden
    }

    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }

    fn b2(&self) -> usize {
        self.w2() + self.hidden
    }

    pub fn log_precision_index(&self) -> usize {
        self.b2() + 1
    }

    /// Splits a flat vector into `(W1, b1, W2, b2, log τ)`.
    pub fn unpack<'a>(
        &self,
        v: &'a [f64],
    ) -> (ArrayView2<'a, f64>, &'a [f64], &'a [f64], f64, f64) {
        assert_eq!(v.len(), self.len());
        let w1 = ArrayView2::from_shape((self.hidden, self.inputs), &v[..self.b1()]).unwrap();
        (
            w1,
            &v[self.b1()..self.w2()],
            &v[self.w2()..self.b2()],
            v[self.b2()],
            v[self.log_precision_index()],
        )
    }

    pub fn pack(
        &self,
        w1: ArrayView2<'_, f64>,
        b1: &[f64],
        w2: &[f64],
        b2: f64,
        log_precision: f64,
    ) -> Vec<f64> {
        assert_eq!(w1.dim(), (self.hidden, self.inputs));
        assert_eq!(b1.len(), self.hidden);
        assert_eq!(w2.len(), self.hidden);
        let mut v = Vec::with_capacity(self.len());
        v.extend(w1.iter());
        v.extend_from_slice(b1);
        v.extend_from_slice(w2);
        v.push(b2);
        v.push(log_precision);
        v
    }

    /// `ŷ = W2·relu(W1 x + b1) + b2`.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> Result<f64> {
        if params.len() != self.len() || x.len() != self.inputs {
            return Err(Error::argument(format!(
                "forward: expected {} parameters and {} inputs, got {} and {}",
                self.len(),
                self.inputs,
                params.len(),
                x.len()
            )));
        }
        let (w1, b1, w2, b2, _) = self.unpack(params);
        Ok(self.forward_unchecked(w1, b1, w2, b2, ArrayView1::from(x)))
    }

    fn forward_unchecked(
        &self,
        w1: ArrayView2<'_, f64>,
        b1: &[f64],
        w2: &[f64],
        b2: f64,
        x: ArrayView1<'_, f64>,
    ) -> f64 {
        let mut out = b2;
        for k in 0..self.hidden {
            let pre = w1.row(k).dot(&x) + b1[k];
            if pre > 0.0 {
                out += w2[k] * pre;
            }
        }
        out
    }

    /// Adds `scale · ∇_z log p(y | x, z)` into `grad` and returns the
    /// log-likelihood term (without the constant).
    fn accumulate_likelihood(
        &self,
        params: &[f64],
        x: ArrayView1<'_, f64>,
        y: f64,
        scale: f64,
        grad: &mut [f64],
        hidden_buf: &mut [f64],
    ) -> f64 {
        let (w1, b1, w2, b2, log_tau) = self.unpack(params);
        let tau = log_tau.exp();
        let mut pred = b2;
        for k in 0..self.hidden {
            let pre = w1.row(k).dot(&x) + b1[k];
            hidden_buf[k] = pre;
            if pre > 0.0 {
                pred += w2[k] * pre;
            }
        }
        let resid = y - pred;
        // d/dŷ of −τ r²/2 is τ r.
        let dpred = scale * tau * resid;
        for k in 0..self.hidden {
            let pre = hidden_buf[k];
            if pre > 0.0 {
                grad[self.w2() + k] += dpred * pre;
                let dpre = dpred * w2[k];
                grad[self.b1() + k] += dpre;
                let row = &mut grad[k * self.inputs..(k + 1) * self.inputs];
                for (g, xj) in row.iter_mut().zip(x.iter()) {
                    *g += dpre * xj;
                }
            }
        }
        grad[self.b2()] += dpred;
        grad[self.log_precision_index()] += scale * (0.5 - 0.5 * tau * resid * resid);
        0.5 * log_tau - 0.5 * tau * resid * resid
    }

    fn log_prior(&self, params: &[f64]) -> f64 {
        let li = self.log_precision_index();
        let weights: f64 = params[..li].iter().map(|w| w * w).sum();
        let log_tau = params[li];
        -0.5 * weights + PRECISION_SHAPE * log_tau - PRECISION_RATE * log_tau.exp()
    }

    fn add_log_prior_grad(&self, params: &[f64], grad: &mut [f64]) {
        let li = self.log_precision_index();
        for (g, w) in grad[..li].iter_mut().zip(params) {
            *g -= w;
        }
        grad[li] += PRECISION_SHAPE - PRECISION_RATE * params[li].exp();
    }
}

/// Posterior over network parameters given the training split of a dataset.
#[derive(Debug, Clone)]
pub struct BnnTarget {
    data: Arc<RegressionDataset>,
    layout: BnnLayout,
    batch_size: usize,
}

impl BnnTarget {
    pub fn new(data: Arc<RegressionDataset>) -> Result<Self> {
        Self::with_layout(data, None, DEFAULT_BATCH_SIZE)
    }

    pub fn with_layout(
        data: Arc<RegressionDataset>,
        layout: Option<BnnLayout>,
        batch_size: usize,
    ) -> Result<Self> {
        if data.train().is_empty() {
            return Err(Error::argument(
                "BNN target needs a non-empty training split",
            ));
        }
        if batch_size == 0 {
            return Err(Error::config("bnn batch size must be positive"));
        }
        let layout = layout.unwrap_or_else(|| BnnLayout::new(data.input_dim()));
        if layout.inputs() != data.input_dim() {
            return Err(Error::argument(
                "layout does not match the dataset's input dimension",
            ));
        }
        Ok(BnnTarget {
            data,
            layout,
            batch_size,
        })
    }

    pub fn layout(&self) -> BnnLayout {
        self.layout
    }

    pub fn dataset(&self) -> &RegressionDataset {
        &self.data
    }

    /// Effective minibatch size (the full training split if it is smaller).
    pub fn batch_size(&self) -> usize {
        self.batch_size.min(self.data.train().len())
    }

    /// Full-data log posterior over the training split, up to a constant.
    pub fn log_posterior(&self, params: &[f64]) -> Result<f64> {
        check_dim(self, params)?;
        let mut scratch = vec![0.0; self.layout.len()];
        let mut hidden = vec![0.0; self.layout.hidden()];
        let mut lp = self.layout.log_prior(params);
        for &i in self.data.train() {
            lp += self.layout.accumulate_likelihood(
                params,
                self.data.features().row(i),
                self.data.targets()[i],
                0.0,
                &mut scratch,
                &mut hidden,
            );
        }
        Ok(lp - 0.5 * (2.0 * PI).ln() * self.data.train().len() as f64)
    }

    /// `∇ log p(z) + (N/|Ω|) Σ_{i∈Ω} ∇ log p(y_i | x_i, z)` with `N` the
    /// training-set size and `Ω = batch` (dataset row indices).
    pub fn log_posterior_grad_minibatch(
        &self,
        params: &[f64],
        batch: &[usize],
    ) -> Result<Vec<f64>> {
        check_dim(self, params)?;
        if batch.is_empty() {
            return Err(Error::argument("minibatch must not be empty"));
        }
        if let Some(&bad) = batch.iter().find(|&&i| i >= self.data.len()) {
            return Err(Error::argument(format!("batch index {bad} out of range")));
        }
        let scale = self.data.train().len() as f64 / batch.len() as f64;
        let mut grad = vec![0.0; self.layout.len()];
        let mut hidden = vec![0.0; self.layout.hidden()];
        for &i in batch {
            self.layout.accumulate_likelihood(
                params,
                self.data.features().row(i),
                self.data.targets()[i],
                scale,
                &mut grad,
                &mut hidden,
            );
        }
        self.layout.add_log_prior_grad(params, &mut grad);
        Ok(grad)
    }
}

impl Target for BnnTarget {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn name(&self) -> &str {
        "bnn"
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.log_posterior(z)
    }

    fn grad_log_density(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.log_posterior_grad_minibatch(z, self.data.train())
    }

    /// One minibatch, drawn without replacement from the training split, is
    /// shared by every particle at a step.
    fn step_gradients(
        &self,
        particles: ArrayView2<'_, f64>,
        rng: &mut dyn RngCore,
    ) -> Result<Array2<f64>> {
        let train = self.data.train();
        let batch: Vec<usize> = if self.batch_size >= train.len() {
            train.to_vec()
        } else {
            rand::seq::index::sample(rng, train.len(), self.batch_size)
                .into_iter()
                .map(|j| train[j])
                .collect()
        };
        let mut grads = Array2::zeros(particles.raw_dim());
        for (row, mut out) in particles.rows().into_iter().zip(grads.rows_mut()) {
            let z = row.to_vec();
            let g = self.log_posterior_grad_minibatch(&z, &batch)?;
            out.iter_mut().zip(g).for_each(|(o, v)| *o = v);
        }
        Ok(grads)
    }

    /// Weights `N(0, 1/(fan_in + 1))`, zero biases, `τ ~ Gamma(1, 0.1)`.
    fn init_particle(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let l = self.layout;
        let mut v = vec![0.0; l.len()];
        let s1 = 1.0 / ((l.inputs() + 1) as f64).sqrt();
        for w in &mut v[..l.b1()] {
            let e: f64 = StandardNormal.sample(&mut *rng);
            *w = s1 * e;
        }
        let s2 = 1.0 / ((l.hidden() + 1) as f64).sqrt();
        for w in &mut v[l.w2()..l.b2()] {
            let e: f64 = StandardNormal.sample(&mut *rng);
            *w = s2 * e;
        }
        let gamma = Gamma::new(PRECISION_SHAPE, 1.0 / PRECISION_RATE).expect("valid gamma");
        v[l.log_precision_index()] = gamma.sample(&mut *rng).max(1e-12).ln();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::finite_diff_gradient;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(layout: BnnLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..layout.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }

    /// Independent scalar loop over units.
    fn forward_oracle(layout: BnnLayout, v: &[f64], x: &[f64]) -> f64 {
        let (d, h) = (layout.inputs(), layout.hidden());
        let mut out = v[d * h + 2 * h];
        for k in 0..h {
            let mut pre = v[d * h + k];
            for j in 0..d {
                pre += v[k * d + j] * x[j];
            }
            out += v[d * h + h + k] * pre.max(0.0);
        }
        out
    }

    #[test]
    fn parameter_count() {
        assert_eq!(BnnLayout::new(6).len(), 6 * 50 + 50 + 50 + 1 + 1);
    }

    #[test]
    fn pack_unpack_round_trip() {
        let layout = BnnLayout::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_params(layout, &mut rng);
        let (w1, b1, w2, b2, lt) = layout.unpack(&v);
        assert_eq!(layout.pack(w1, b1, w2, b2, lt), v);
    }

    #[test]
    fn zero_parameters_predict_zero() {
        let layout = BnnLayout::new(4);
        let v = vec![0.0; layout.len()];
        assert_eq!(layout.forward(&v, &[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_passthrough() {
        let layout = BnnLayout::new(1);
        let mut w1 = Array2::zeros((50, 1));
        w1[[0, 0]] = 1.0;
        let mut w2 = vec![0.0; 50];
        w2[0] = 1.0;
        let v = layout.pack(w1.view(), &[0.0; 50], &w2, 0.0, 0.0);
        assert_eq!(layout.forward(&v, &[2.0]).unwrap(), 2.0);
    }

    #[test]
    fn forward_matches_scalar_loop() {
        let layout = BnnLayout::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let v = random_params(layout, &mut rng);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = layout.forward(&v, &x).unwrap();
            assert!((got - forward_oracle(layout, &v, &x)).abs() < 1e-12);
        }
        assert!(layout.forward(&vec![0.0; layout.len()], &[1.0]).is_err());
    }

    fn toy_dataset(n: usize, seed: u64) -> Arc<RegressionDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r[0] - 2.0 * r[1] + 0.5 * r[2] * r[0])
            .collect();
        Arc::new(RegressionDataset::from_arrays(x, y, vec![], 0, 0.0).unwrap())
    }

    #[test]
    fn full_batch_estimator_is_exact_gradient() {
        let target = BnnTarget::new(toy_dataset(10, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_params(target.layout(), &mut rng);
        let full = target.grad_log_density(&v).unwrap();
        let all: Vec<usize> = target.dataset().train().to_vec();
        assert_eq!(target.log_posterior_grad_minibatch(&v, &all).unwrap(), full);
    }

    #[test]
    fn singleton_batches_average_to_full_gradient() {
        let target = BnnTarget::new(toy_dataset(10, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random_params(target.layout(), &mut rng);
        let full = target.grad_log_density(&v).unwrap();
        let train = target.dataset().train().to_vec();
        let mut avg = vec![0.0; v.len()];
        for &i in &train {
            let g = target.log_posterior_grad_minibatch(&v, &[i]).unwrap();
            avg.iter_mut()
                .zip(g)
                .for_each(|(a, g)| *a += g / train.len() as f64);
        }
        for (a, f) in avg.iter().zip(&full) {
            assert!((a - f).abs() < 1e-10 * f.abs().max(1.0), "{a} vs {f}");
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let target = BnnTarget::new(toy_dataset(5, 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let v = random_params(target.layout(), &mut rng);
            let g = target.grad_log_density(&v).unwrap();
            let fd = finite_diff_gradient(&target, &v, 1e-6).unwrap();
            let num: f64 = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(num / (den + 1e-12) < 1e-4, "rel err {}", num / den);
        }
    }

    #[test]
    fn empty_batch_is_rejected() {
        let target = BnnTarget::new(toy_dataset(5, 9)).unwrap();
        let v = vec![0.0; target.dim()];
        assert!(matches!(
            target.log_posterior_grad_minibatch(&v, &[]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn minibatch_uses_shared_rng() {
        let target = BnnTarget::with_layout(toy_dataset(30, 10), None, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Array2::from_shape_fn((2, target.dim()), |_| rng.random_range(-0.5..0.5));
        let a = target
            .step_gradients(p.view(), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        let b = target
            .step_gradients(p.view(), &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(a, b);
    }
}
