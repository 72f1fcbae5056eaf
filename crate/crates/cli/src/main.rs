//! `sgldr` command-line harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or numerical error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sgldr::bnn::{self, RawTable, RegressionDataset};
use sgldr::diagnostics::{self, Transform};
use sgldr::experiment::{
    self, ExperimentConfig, KernelModeName, SeedResult, TargetConfig, TargetName,
};
use sgldr::{Error, Method, Result, StepSchedule, TraceStore};

#[derive(Parser)]
#[command(
    name = "sgldr",
    version,
    about = "Particle samplers: parallel SGLD, SVGD and SGLD with repulsion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Sample {
        config: PathBuf,
        /// Run directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override `sampler.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run two configs over several seeds and tabulate ESS and moment error.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute diagnostics of a saved trace.
    Diagnose {
        trace: PathBuf,
        /// JSON sidecar; defaults to the trace path with a `.json` extension.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Mode-coverage radius (defaults to the run's configured radius).
        #[arg(long)]
        radius: Option<f64>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bayesian neural network regression on a CSV dataset.
    Bnn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target_col: String,
        #[arg(long, default_value = "sgld_r")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-4)]
        step_size: f64,
        /// Pick the step size from this grid by validation RMSE instead.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        grid: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20)]
        particles: usize,
        #[arg(long, default_value_t = 2000)]
        iterations: u64,
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long, default_value_t = 10)]
        thin: u64,
        #[arg(long, default_value_t = bnn::DEFAULT_BATCH_SIZE)]
        batch_size: usize,
        /// Use a random subset of this many rows.
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        /// Seed for the train/test split (defaults to `--seed`).
        #[arg(long)]
        split_seed: Option<u64>,
    },
    /// Export running estimates of `E[X]` and `E[X²]` from a saved trace.
    TraceExport {
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample { config, out, seed } => cmd_sample(&config, out, seed),
        Command::Compare { a, b, seeds, out } => cmd_compare(&a, &b, &seeds, &out),
        Command::Diagnose {
            trace,
            sidecar,
            radius,
            out,
        } => cmd_diagnose(&trace, sidecar.as_deref(), radius, out.as_deref()),
        Command::Bnn {
            data,
            target_col,
            method,
            seed,
            out,
            step_size,
            grid,
            particles,
            iterations,
            burn_in,
            thin,
            batch_size,
            subsample,
            test_fraction,
            split_seed,
        } => cmd_bnn(BnnArgs {
            data,
            target_col,
            method,
            seed,
            out,
            step_size,
            grid,
            particles,
            iterations,
            burn_in: burn_in.unwrap_or(iterations / 2),
            thin,
            batch_size,
            subsample,
            test_fraction,
            split_seed: split_seed.unwrap_or(seed),
        }),
        Command::TraceExport {
            trace,
            format,
            sidecar,
            out,
        } => cmd_trace_export(&trace, format, sidecar.as_deref(), out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn default_run_dir(config: &ExperimentConfig) -> PathBuf {
    config.output.dir.clone().unwrap_or_else(|| {
        PathBuf::from("runs").join(format!("{}_seed{}", config.label(), config.sampler.seed))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn cmd_sample(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config = config.with_seed(s);
    }
    let dir = out.unwrap_or_else(|| default_run_dir(&config));
    let outcome = experiment::run_experiment(&config)?;
    experiment::write_run_dir(&dir, &config, &outcome)?;
    let d = &outcome.diagnostics;
    let mut line = format!(
        "method={} target={} ess={} error={} wall_s={:.3}",
        config.label(),
        outcome.trace.meta().target,
        fmt_opt(d.ess),
        fmt_opt(d.moment_error),
        outcome.wall_seconds
    );
    if let (Some(c), Some(n)) = (d.mode_coverage, d.mode_count) {
        line.push_str(&format!(" modes={c}/{n}"));
    }
    if let Some(e) = &outcome.bnn {
        line.push_str(&format!(" rmse={:.4} test_ll={:.4}", e.rmse, e.test_ll));
    }
    println!("{line}");
    println!("wrote {}", dir.display());
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let err = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize)]
struct SeedRow<'a> {
    method: &'a str,
    seed: u64,
    ess: f64,
    ess_per_s: f64,
    error: f64,
    mode_coverage: Option<usize>,
}

fn cmd_compare(a: &Path, b: &Path, seeds: &[u64], out: &Path) -> Result<()> {
    let ca = ExperimentConfig::load(a)?;
    let cb = ExperimentConfig::load(b)?;
    if ca.target != cb.target {
        return Err(Error::Config(format!(
            "{} and {} use different targets; compare needs the same [target] section",
            a.display(),
            b.display()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::Config("--seeds is empty".into()));
    }
    let (la, mut lb) = (ca.label(), cb.label());
    if la == lb {
        lb.push_str("_b");
    }
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    let ra = experiment::run_seeds(&ca, seeds, Some(&out.join(&la)))?;
    let rb = experiment::run_seeds(&cb, seeds, Some(&out.join(&lb)))?;
    let rows = [
        experiment::aggregate(&la, &ra),
        experiment::aggregate(&lb, &rb),
    ];
    write_csv(&out.join("compare.csv"), &rows)?;
    let per_seed: Vec<SeedRow> = [(&la, &ra), (&lb, &rb)]
        .into_iter()
        .flat_map(|(label, results): (&String, &Vec<SeedResult>)| {
            results.iter().map(move |r| SeedRow {
                method: label,
                seed: r.seed,
                ess: r.ess,
                ess_per_s: r.ess_per_s,
                error: r.error,
                mode_coverage: r.mode_coverage,
            })
        })
        .collect();
    write_csv(&out.join("per_seed.csv"), &per_seed)?;

    let width = rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(6)
        .max(6);
    println!(
        "{:<width$}  {:>10}  {:>10}  {:>12}",
        "method", "ESS", "ESS/s", "error of E[X]"
    );
    for r in &rows {
        println!(
            "{:<width$}  {:>10.2}  {:>10.1}  {:>6.3} ± {:<5.3}",
            r.method, r.ess, r.ess_per_s, r.err_mean, r.err_std
        );
    }
    println!(
        "seeds: {seeds:?}; wrote {}",
        out.join("compare.csv").display()
    );
    Ok(())
}

fn cmd_diagnose(
    trace: &Path,
    sidecar: Option<&Path>,
    radius: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let store = TraceStore::load(trace, sidecar)?;
    let report = experiment::diagnose_trace(&store, radius)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Parse(e.to_string()))?;
    if let Some(path) = out {
        std::fs::write(path, format!("{json}\n")).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
    }
    println!("{json}");
    Ok(())
}

struct BnnArgs {
    data: PathBuf,
    target_col: String,
    method: Method,
    seed: u64,
    out: PathBuf,
    step_size: f64,
    grid: Option<Vec<f64>>,
    particles: usize,
    iterations: u64,
    burn_in: u64,
    thin: u64,
    batch_size: usize,
    subsample: Option<usize>,
    test_fraction: f64,
    split_seed: u64,
}

fn cmd_bnn(args: BnnArgs) -> Result<()> {
    let mut target = TargetConfig::named(TargetName::Bnn);
    target.data = Some(args.data.clone());
    target.target_col = Some(args.target_col.clone());
    target.split_seed = Some(args.split_seed);
    target.test_fraction = Some(args.test_fraction);
    target.subsample = args.subsample;
    target.batch_size = Some(args.batch_size);
    let mut config = ExperimentConfig {
        target,
        sampler: experiment::SamplerSection {
            method: args.method,
            label: None,
            particles: args.particles,
            iterations: args.iterations,
            burn_in: args.burn_in,
            thin: args.thin,
            step_size: StepSchedule::Constant {
                value: args.step_size,
            },
            noise: true,
            repulsion_cutoff_fraction: 1.0,
            seed: args.seed,
        },
        kernel: experiment::KernelSection {
            mode: KernelModeName::RbfMedian,
            h: None,
        },
        diagnostics: Default::default(),
        output: experiment::OutputSection {
            dir: Some(args.out.clone()),
        },
        base_dir: None,
    };
    config.validate()?;

    if let Some(grid) = &args.grid {
        let mut table = RawTable::read(&args.data)?;
        if let Some(n) = args.subsample {
            table = table.subsample(n, args.split_seed);
        }
        let (x, y, names) = table.features_and_target(&args.target_col)?;
        let ds = RegressionDataset::from_arrays(x, y, names, args.split_seed, args.test_fraction)?;
        let search = bnn::select_step_size(
            &ds,
            &config.sampler_config()?,
            grid,
            args.batch_size,
            args.seed,
            0.1,
        )?;
        for (eps, rmse) in &search.scores {
            println!("grid step_size={eps:e} validation_rmse={rmse:.4}");
        }
        config.sampler.step_size = StepSchedule::Constant {
            value: search.best_step_size,
        };
        std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
            path: args.out.clone(),
            source: e,
        })?;
        experiment::write_json(&args.out.join("grid_search.json"), &search)?;
    }

    let outcome = experiment::run_experiment(&config)?;
    experiment::write_run_dir(&args.out, &config, &outcome)?;
    let eval = outcome
        .bnn
        .ok_or_else(|| Error::Config("test split is empty; raise --test-fraction".into()))?;
    println!(
        "method={} rmse={:.4} test_ll={:.4} baseline_rmse={:.4} wall_s={:.2}",
        args.method, eval.rmse, eval.test_ll, eval.baseline_rmse, outcome.wall_seconds
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct MomentRow {
    iter: u64,
    coord: usize,
    mean: f64,
    second_moment: f64,
}

fn cmd_trace_export(
    trace: &Path,
    format: Format,
    sidecar: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let store = TraceStore::load(trace, sidecar)?;
    if store.is_empty() {
        return Err(Error::Numerical(format!(
            "{} contains no snapshots",
            trace.display()
        )));
    }
    let transform = serde_json::from_value::<ExperimentConfig>(store.meta().context.clone())
        .ok()
        .and_then(|c| c.target.reference().ok())
        .map_or(Transform::Identity, |r| r.transform);
    let moments = diagnostics::running_moments(&store, transform)?;
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Export<'a> {
                transform: Transform,
                #[serde(flatten)]
                moments: &'a diagnostics::RunningMoments,
            }
            serde_json::to_writer_pretty(
                &mut buf,
                &Export {
                    transform,
                    moments: &moments,
                },
            )
            .map_err(|e| Error::Parse(e.to_string()))?;
            buf.push(b'\n');
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            for (i, &iter) in moments.iterations.iter().enumerate() {
                for coord in 0..moments.mean[i].len() {
                    w.serialize(MomentRow {
                        iter,
                        coord,
                        mean: moments.mean[i][coord],
                        second_moment: moments.second_moment[i][coord],
                    })
                    .map_err(|e| Error::Parse(e.to_string()))?;
                }
            }
            w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        }
    }
    match out {
        Some(path) => std::fs::write(path, &buf).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&buf).map_err(|e| Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        }
    }
}
