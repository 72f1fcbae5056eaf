use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::data::RegressionDataset;
use super::network::{BnnLayout, BnnTarget};
use crate::sampler::{run, SamplerConfig, StepSchedule};
use crate::targets::log_sum_exp;
use crate::trace::TraceStore;
use crate::{Error, Result};

/// Per-sample predictions (standardized mean, standardized noise variance)
/// for one input.
fn sample_predictions(
    layout: BnnLayout,
    trace: &TraceStore,
    x_norm: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if trace.is_empty() {
        return Err(Error::argument("prediction from an empty trace"));
    }
    if trace.dim() != layout.len() {
        return Err(Error::argument(format!(
            "trace has dimension {}, network expects {}",
            trace.dim(),
            layout.len()
        )));
    }
    let li = layout.log_precision_index();
    let mut out = Vec::with_capacity(trace.snapshots().len() * trace.particle_count());
    for snap in trace.samples() {
        for row in snap.rows() {
            let params = row.to_vec();
            let mean = layout.forward(&params, x_norm)?;
            out.push((mean, (-params[li]).exp()));
        }
    }
    Ok(out)
}

/// Posterior predictive mean and variance at a raw (unstandardized) input,
/// in original target units.
///
/// The variance is the spread of the per-sample predictions plus the mean
/// noise variance `E[1/τ]`.
pub fn predict(trace: &TraceStore, dataset: &RegressionDataset, x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != dataset.input_dim() {
        return Err(Error::argument(format!(
            "expected {} features, got {}",
            dataset.input_dim(),
            x.len()
        )));
    }
    let layout = BnnLayout::new(dataset.input_dim());
    let preds = sample_predictions(layout, trace, &dataset.normalize_features(x))?;
    let (mean, var) = predictive_moments(&preds);
    let s = dataset.target_scale();
    Ok((dataset.denormalize_target(mean), var * s * s))
}

fn predictive_moments(preds: &[(f64, f64)]) -> (f64, f64) {
    let n = preds.len() as f64;
    let mean = preds.iter().map(|p| p.0).sum::<f64>() / n;
    let spread = preds.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / n;
    let noise = preds.iter().map(|p| p.1).sum::<f64>() / n;
    (mean, spread + noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Test RMSE in original target units.
    pub rmse: f64,
    /// Mean test log-likelihood of the sample-averaged Gaussian predictive
    /// density, in original units.
    pub test_ll: f64,
    /// RMSE of always predicting the training-target mean.
    pub baseline_rmse: f64,
}

pub fn evaluate(trace: &TraceStore, dataset: &RegressionDataset) -> Result<Evaluation> {
    if dataset.test().is_empty() {
        return Err(Error::argument("evaluation needs a non-empty test split"));
    }
    let layout = BnnLayout::new(dataset.input_dim());
    let s = dataset.target_scale();
    let train_mean = dataset.denormalize_target(0.0);
    let (mut se, mut base_se, mut ll) = (0.0, 0.0, 0.0);
    for &i in dataset.test() {
        let x = dataset.features().row(i).to_vec();
        let preds = sample_predictions(layout, trace, &x)?;
        let y = dataset.raw_target(i);
        let (mean, _) = predictive_moments(&preds);
        se += (dataset.denormalize_target(mean) - y).powi(2);
        base_se += (train_mean - y).powi(2);
        let logs: Vec<f64> = preds
            .iter()
            .map(|&(m, noise_var)| {
                let var = noise_var * s * s;
                let r = y - dataset.denormalize_target(m);
                -0.5 * (2.0 * PI * var).ln() - 0.5 * r * r / var
            })
            .collect();
        ll += log_sum_exp(&logs) - (preds.len() as f64).ln();
    }
    let n = dataset.test().len() as f64;
    Ok(Evaluation {
        rmse: (se / n).sqrt(),
        test_ll: ll / n,
        baseline_rmse: (base_se / n).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_step_size: f64,
    /// `(step size, validation RMSE)`; failed runs score `+∞`.
    pub scores: Vec<(f64, f64)>,
}

/// Picks the constant step size with the lowest validation RMSE.
///
/// The validation fold is `validation_fraction` of the training rows,
/// carved out with `seed`.
pub fn select_step_size(
    dataset: &RegressionDataset,
    config: &SamplerConfig,
    grid: &[f64],
    batch_size: usize,
    seed: u64,
    validation_fraction: f64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::config("step-size grid is empty"));
    }
    let fold = Arc::new(dataset.validation_split(seed, validation_fraction)?);
    let target = BnnTarget::with_layout(fold.clone(), None, batch_size)?;
    let mut scores = Vec::with_capacity(grid.len());
    for &eps in grid {
        let cfg = SamplerConfig {
            step_size: StepSchedule::Constant { value: eps },
            ..config.clone()
        };
        let score = match run(&cfg, &target) {
            Ok(trace) => evaluate(&trace, &fold)?.rmse,
            Err(Error::Step { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        scores.push((eps, score));
    }
    let best = scores
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    Ok(GridSearchResult {
        best_step_size: best.0,
        scores,
    })
}
