//! Declarative experiment configuration and run orchestration.
//!
//! An experiment file is TOML with `[target]`, `[sampler]`, `[kernel]`,
//! `[diagnostics]` and `[output]` sections. Unknown keys are rejected.
//!
//! ```toml
//! [target]
//! name = "moe"
//!
//! [sampler]
//! method = "sgld_r"
//! particles = 10
//! iterations = 1000
//! burn_in = 500
//! thin = 10
//! step_size = { schedule = "constant", value = 0.1 }
//! seed = 1
//!
//! [kernel]
//! mode = "rbf-median"
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bnn::{self, BnnTarget, Evaluation, RawTable, RegressionDataset};
use crate::diagnostics::{self, Transform};
use crate::kernels::KernelMode;
use crate::sampler::{self, Method, SamplerConfig, StepSchedule};
use crate::targets::{
    GaussianGridMixture, LogReparameterized, MixtureOfExponentials, StandardGaussian, Target,
};
use crate::trace::TraceStore;
use crate::{Error, Result};

/// Default coverage radius: three standard deviations of a grid component.
pub const DEFAULT_COVERAGE_RADIUS: f64 = 0.9486832980505138;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetName {
    #[serde(rename = "moe")]
    Moe,
    #[serde(rename = "mog3x3")]
    Mog3x3,
    #[serde(rename = "gauss-std")]
    GaussStd,
    #[serde(rename = "bnn")]
    Bnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub name: TargetName,
    /// `moe`: exponential rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// `moe`: mixture weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// `gauss-std`: dimension (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// `bnn`: CSV path, relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_col: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
    /// `bnn`: use a random subset of this many rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

impl TargetConfig {
    pub fn named(name: TargetName) -> Self {
        TargetConfig {
            name,
            rates: None,
            weights: None,
            dim: None,
            data: None,
            target_col: None,
            split_seed: None,
            test_fraction: None,
            subsample: None,
            batch_size: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let moe_keys = self.rates.is_some() || self.weights.is_some();
        let bnn_keys = self.data.is_some()
            || self.target_col.is_some()
            || self.split_seed.is_some()
            || self.test_fraction.is_some()
            || self.subsample.is_some()
            || self.batch_size.is_some();
        let misplaced = match self.name {
            TargetName::Moe => (bnn_keys || self.dim.is_some())
                .then_some("moe accepts only target.rates and target.weights"),
            TargetName::Mog3x3 => {
                (moe_keys || bnn_keys || self.dim.is_some()).then_some("mog3x3 takes no parameters")
            }
            TargetName::GaussStd => {
                (moe_keys || bnn_keys).then_some("gauss-std accepts only target.dim")
            }
            TargetName::Bnn => (moe_keys || self.dim.is_some())
                .then_some("bnn does not accept target.rates, target.weights or target.dim"),
        };
        if let Some(msg) = misplaced {
            return Err(Error::config(msg));
        }
        if self.name == TargetName::Bnn {
            if self.data.is_none() {
                return Err(Error::config("target.data is required for the bnn target"));
            }
            if self.target_col.is_none() {
                return Err(Error::config(
                    "target.target_col is required for the bnn target",
                ));
            }
        }
        if self.dim == Some(0) {
            return Err(Error::config("target.dim must be positive"));
        }
        Ok(())
    }

    fn moe(&self) -> Result<MixtureOfExponentials> {
        match (&self.rates, &self.weights) {
            (None, None) => Ok(MixtureOfExponentials::benchmark()),
            (Some(r), Some(w)) => MixtureOfExponentials::new(r.clone(), w.clone()),
            _ => Err(Error::config(
                "target.rates and target.weights must be given together",
            )),
        }
    }

    /// Analytic quantities needed by the diagnostics; needs no data files.
    pub fn reference(&self) -> Result<Reference> {
        Ok(match self.name {
            TargetName::Moe => Reference {
                truth: Some(vec![self.moe()?.analytic_moment(1)]),
                transform: Transform::Exp,
                mode_centers: None,
            },
            TargetName::Mog3x3 => {
                let mog = GaussianGridMixture::grid3x3();
                Reference {
                    truth: Some(mog.mean().to_vec()),
                    transform: Transform::Identity,
                    mode_centers: Some(mog.centers().iter().map(|c| c.to_vec()).collect()),
                }
            }
            TargetName::GaussStd => Reference {
                truth: Some(vec![0.0; self.dim.unwrap_or(1)]),
                transform: Transform::Identity,
                mode_centers: None,
            },
            TargetName::Bnn => Reference {
                truth: None,
                transform: Transform::Identity,
                mode_centers: None,
            },
        })
    }
}

/// Ground truth and sample transform associated with a target.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    /// Exact `E[X]` in the original (untransformed) space.
    pub truth: Option<Vec<f64>>,
    pub transform: Transform,
    pub mode_centers: Option<Vec<Vec<f64>>>,
}

pub struct BuiltTarget {
    pub target: Box<dyn Target>,
    pub reference: Reference,
    pub dataset: Option<Arc<RegressionDataset>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub method: Method,
    /// Display name used by `compare`; defaults to the method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default = "defaults::particles")]
    pub particles: usize,
    #[serde(default = "defaults::iterations")]
    pub iterations: u64,
    #[serde(default = "defaults::burn_in")]
    pub burn_in: u64,
    #[serde(default = "defaults::thin")]
    pub thin: u64,
    pub step_size: StepSchedule,
    #[serde(default = "defaults::noise")]
    pub noise: bool,
    #[serde(default = "defaults::cutoff")]
    pub repulsion_cutoff_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn particles() -> usize {
        10
    }
    pub fn iterations() -> u64 {
        1000
    }
    pub fn burn_in() -> u64 {
        500
    }
    pub fn thin() -> u64 {
        10
    }
    pub fn noise() -> bool {
        true
    }
    pub fn cutoff() -> f64 {
        1.0
    }
    pub fn radius() -> f64 {
        super::DEFAULT_COVERAGE_RADIUS
    }
    pub fn metrics() -> Vec<super::Metric> {
        vec![
            super::Metric::Ess,
            super::Metric::MomentError,
            super::Metric::ModeCoverage,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelModeName {
    RbfMedian,
    RbfFixed,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub mode: KernelModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            mode: KernelModeName::RbfMedian,
            h: None,
        }
    }
}

impl KernelSection {
    pub fn to_mode(&self) -> Result<KernelMode> {
        match (self.mode, self.h) {
            (KernelModeName::RbfFixed, Some(h)) if h > 0.0 && h.is_finite() => {
                Ok(KernelMode::RbfFixed { h })
            }
            (KernelModeName::RbfFixed, Some(h)) => {
                Err(Error::config(format!("kernel.h must be positive, got {h}")))
            }
            (KernelModeName::RbfFixed, None) => Err(Error::config(
                "kernel.h is required when kernel.mode = \"rbf-fixed\"",
            )),
            (_, Some(_)) => Err(Error::config(
                "kernel.h is only valid with kernel.mode = \"rbf-fixed\"",
            )),
            (KernelModeName::RbfMedian, None) => Ok(KernelMode::RbfMedian),
            (KernelModeName::Identity, None) => Ok(KernelMode::Identity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ess,
    MomentError,
    ModeCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "defaults::metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "defaults::radius")]
    pub mode_coverage_radius: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            metrics: defaults::metrics(),
            mode_coverage_radius: DEFAULT_COVERAGE_RADIUS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Run directory; relative paths resolve against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetConfig,
    pub sampler: SamplerSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative data paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {}", path.display(), strip_prefix(&e))))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("experiment config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        self.sampler_config()?.validate()?;
        let r = self.diagnostics.mode_coverage_radius;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::config(
                "diagnostics.mode_coverage_radius must be positive",
            ));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig> {
        let s = &self.sampler;
        Ok(SamplerConfig {
            method: s.method,
            particle_count: s.particles,
            step_size: s.step_size,
            total_iterations: s.iterations,
            burn_in: s.burn_in,
            thin: s.thin,
            kernel: self.kernel.to_mode()?,
            noise_enabled: s.noise,
            repulsion_cutoff_fraction: s.repulsion_cutoff_fraction,
            seed: s.seed,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.sampler.seed = seed;
        cfg
    }

    /// Label used in comparison tables.
    pub fn label(&self) -> String {
        if let Some(l) = &self.sampler.label {
            return l.clone();
        }
        match (self.sampler.method, self.kernel.mode) {
            (Method::SgldR, KernelModeName::Identity) => "sgld_r-identity".into(),
            (m, _) => m.to_string(),
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn build_target(&self) -> Result<BuiltTarget> {
        self.target.validate()?;
        let reference = self.target.reference()?;
        let t = &self.target;
        let (target, dataset): (Box<dyn Target>, _) = match t.name {
            TargetName::Moe => (
                Box::new(LogReparameterized::new(t.moe()?).named("moe")),
                None,
            ),
            TargetName::Mog3x3 => (Box::new(GaussianGridMixture::grid3x3()), None),
            TargetName::GaussStd => (Box::new(StandardGaussian::new(t.dim.unwrap_or(1))), None),
            TargetName::Bnn => {
                let path = self.resolve(t.data.as_deref().expect("validated"));
                let mut table = RawTable::read(&path)?;
                let split_seed = t.split_seed.unwrap_or(0);
                if let Some(n) = t.subsample {
                    table = table.subsample(n, split_seed);
                }
                let (x, y, names) =
                    table.features_and_target(t.target_col.as_deref().expect("validated"))?;
                let ds = Arc::new(RegressionDataset::from_arrays(
                    x,
                    y,
                    names,
                    split_seed,
                    t.test_fraction.unwrap_or(0.1),
                )?);
                let target = BnnTarget::with_layout(
                    ds.clone(),
                    None,
                    t.batch_size.unwrap_or(bnn::DEFAULT_BATCH_SIZE),
                )?;
                (Box::new(target), Some(ds))
            }
        };
        Ok(BuiltTarget {
            target,
            reference,
            dataset,
        })
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Summary metrics of one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DiagnosticsReport {
    pub ess: Option<f64>,
    pub ess_per_second: Option<f64>,
    pub moment_error: Option<f64>,
    pub mode_coverage: Option<usize>,
    pub ess_min: Option<f64>,
    pub moment_estimate: Option<Vec<f64>>,
    pub truth: Option<Vec<f64>>,
    pub mode_count: Option<usize>,
}

pub fn diagnose(
    trace: &TraceStore,
    reference: &Reference,
    metrics: &[Metric],
    coverage_radius: f64,
) -> Result<DiagnosticsReport> {
    let mut report = DiagnosticsReport::default();
    if metrics.contains(&Metric::Ess) && trace.snapshots().len() >= diagnostics::MIN_ESS_LENGTH {
        let ess = diagnostics::ess_report(trace)?;
        report.ess = Some(ess.mean_ess);
        report.ess_min = Some(ess.min_ess);
        report.ess_per_second = Some(ess.ess_per_second);
    }
    if metrics.contains(&Metric::MomentError) {
        if let Some(truth) = &reference.truth {
            let m = diagnostics::moment_error(trace, truth, reference.transform)?;
            report.moment_error = Some(m.error);
            report.moment_estimate = Some(m.estimate);
            report.truth = Some(m.truth);
        }
    }
    if metrics.contains(&Metric::ModeCoverage) {
        if let Some(centers) = &reference.mode_centers {
            report.mode_coverage =
                Some(diagnostics::mode_coverage(trace, centers, coverage_radius)?);
            report.mode_count = Some(centers.len());
        }
    }
    Ok(report)
}

pub struct RunOutcome {
    pub trace: TraceStore,
    pub diagnostics: DiagnosticsReport,
    pub bnn: Option<Evaluation>,
    pub wall_seconds: f64,
}

/// Runs one experiment end to end (no files written).
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let built = config.build_target()?;
    let sampler = config.sampler_config()?;
    let start = std::time::Instant::now();
    let mut trace = sampler::run(&sampler, built.target.as_ref())?;
    let wall_seconds = start.elapsed().as_secs_f64();
    trace.meta_mut().context =
        serde_json::to_value(config).map_err(|e| Error::Parse(e.to_string()))?;
    let diagnostics = diagnose(
        &trace,
        &built.reference,
        &config.diagnostics.metrics,
        config.diagnostics.mode_coverage_radius,
    )?;
    let bnn = match &built.dataset {
        Some(ds) if !ds.test().is_empty() => Some(bnn::evaluate(&trace, ds)?),
        _ => None,
    };
    Ok(RunOutcome {
        trace,
        diagnostics,
        bnn,
        wall_seconds,
    })
}

/// Writes `trace.csv`, `trace.json`, `diagnostics.json`, `config.toml` and,
/// for BNN runs, `evaluation.json` into `dir`.
pub fn write_run_dir(dir: &Path, config: &ExperimentConfig, outcome: &RunOutcome) -> Result<()> {
    outcome.trace.save(dir)?;
    write_json(&dir.join("diagnostics.json"), &outcome.diagnostics)?;
    if let Some(eval) = &outcome.bnn {
        write_json(&dir.join("evaluation.json"), eval)?;
    }
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, config.to_toml_string()).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Diagnostics of a persisted trace, using the experiment config stored in
/// its sidecar to recover the ground truth.
pub fn diagnose_trace(trace: &TraceStore, radius: Option<f64>) -> Result<DiagnosticsReport> {
    let cfg: ExperimentConfig =
        serde_json::from_value(trace.meta().context.clone()).map_err(|e| {
            Error::Parse(format!(
                "trace sidecar does not carry an experiment config: {e}"
            ))
        })?;
    let radius = radius.unwrap_or(cfg.diagnostics.mode_coverage_radius);
    let all = [Metric::Ess, Metric::MomentError, Metric::ModeCoverage];
    diagnose(trace, &cfg.target.reference()?, &all, radius)
}

/// One seed of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub method: String,
    pub seed: u64,
    pub ess: f64,
    pub ess_per_s: f64,
    pub error: f64,
    pub mode_coverage: Option<usize>,
}

/// Aggregate row in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub ess: f64,
    pub ess_per_s: f64,
    pub err_mean: f64,
    pub err_std: f64,
}

/// Plain means over seeds; `err_std` is the sample standard deviation
/// (0 for a single seed).
pub fn aggregate(method: &str, results: &[SeedResult]) -> CompareRow {
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&SeedResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let err_mean = mean(&|r| r.error);
    let err_std = if results.len() > 1 {
        (results
            .iter()
            .map(|r| (r.error - err_mean).powi(2))
            .sum::<f64>()
            / (n - 1.0))
            .sqrt()
    } else {
        0.0
    };
    CompareRow {
        method: method.to_string(),
        ess: mean(&|r| r.ess),
        ess_per_s: mean(&|r| r.ess_per_s),
        err_mean,
        err_std,
    }
}

/// Runs `config` once per seed. `out_dir`, when given, receives one run
/// directory per seed.
pub fn run_seeds(
    config: &ExperimentConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<Vec<SeedResult>> {
    let mut results = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = config.with_seed(seed);
        let outcome = run_experiment(&cfg)?;
        if let Some(dir) = out_dir {
            write_run_dir(&dir.join(format!("seed_{seed}")), &cfg, &outcome)?;
        }
        let d = &outcome.diagnostics;
        results.push(SeedResult {
            method: cfg.label(),
            seed,
            ess: d.ess.unwrap_or(f64::NAN),
            ess_per_s: d.ess_per_second.unwrap_or(f64::NAN),
            error: d.moment_error.unwrap_or(f64::NAN),
            mode_coverage: d.mode_coverage,
        });
    }
    Ok(results)
}
