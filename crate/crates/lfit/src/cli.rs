//! The `lfit` command line interface.
//!
//! Subcommands:
//!
//! * `simulate` — build a simulation table and save it (CSV or `.bin`),
//! * `test-data` — generate test datasets with known parameters,
//! * `run` — run an experiment from a config file,
//! * `plot-data` — turn a report into plot-ready CSVs,
//! * `transform` — fit a single global transformation for audit, and
//!   optionally apply it to raw summary vectors.

use crate::error::{Error, Result};
use crate::harness::{
    emit_plot_data, generate_table, generate_test_data, run_experiment, ExperimentConfig,
    ExperimentReport, Model,
};
use crate::inference::{make_global_transformation, ComponentChoice, MethodSpec, PreparedTable};
use crate::io::{load_table, parse_prior, save_table};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(
    name = "lfit",
    about = "Likelihood-free inference with locally fitted summary projections",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (0 = one per core). Results do
    /// not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Model: ricker, gk or toy.
    #[arg(long)]
    model: String,

    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Observations per g-and-k dataset.
    #[arg(long)]
    n_obs: Option<usize>,

    /// Number of g-and-k quantile summaries.
    #[arg(long)]
    n_quantiles: Option<usize>,

    /// Prior override, formatted `lo:hi;lo:hi;...`.
    #[arg(long)]
    prior: Option<String>,
}

impl ModelArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let model = Model::from_str(&self.model)?;
        let mut config = ExperimentConfig::defaults_for(model);
        config.seed = self.seed;
        if let Some(n_obs) = self.n_obs {
            config.gk.n_obs = n_obs;
        }
        if let Some(nq) = self.n_quantiles {
            config.gk.n_quantiles = nq;
        }
        if let Some(prior) = &self.prior {
            config.prior = Some(parse_prior(prior)?);
        }
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a table of (parameters, summaries) draws and save it.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,

        /// Number of simulations.
        #[arg(long)]
        n: usize,

        /// Output path; `.bin` selects the binary cache format.
        #[arg(long)]
        out: PathBuf,
    },

    /// Generate test datasets with known true parameters.
    TestData {
        #[command(flatten)]
        model: ModelArgs,

        /// Number of test datasets.
        #[arg(long)]
        n_test: usize,

        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },

    /// Run an experiment described by a config file.
    Run {
        /// Path to a `key = value` experiment config.
        #[arg(long)]
        config: PathBuf,

        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,

        /// Output directory for report.csv, timings.csv and plot data.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },

    /// Recompute plot-ready CSVs from an existing report.
    PlotData {
        /// Path to a report.csv produced by `run`.
        #[arg(long)]
        report: PathBuf,

        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },

    /// Fit one global transformation for audit or replay.
    Transform {
        /// Path to a saved simulation table.
        #[arg(long)]
        table: PathBuf,

        /// Transformation: identity, regression or pls.
        #[arg(long)]
        method: String,

        /// PLS component count (defaults to cross-validated selection).
        #[arg(long)]
        components: Option<usize>,

        /// Seed for cross-validation folds.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Output path for the JSON bundle.
        #[arg(long)]
        out: PathBuf,

        /// Optional CSV of raw summary vectors to transform.
        #[arg(long)]
        apply: Option<PathBuf>,

        /// Output CSV for the transformed vectors (with --apply).
        #[arg(long)]
        transformed: Option<PathBuf>,
    },
}

/// Runs the CLI; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message (including --help/--version).
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.threads > 0 {
        // Build the global pool once; later calls in the same process keep
        // the existing pool, which never changes results.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("lfit: {e}");
            1
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate { model, n, out } => {
            let mut config = model.to_config()?;
            config.n_sims = n;
            let table = generate_table(&config)?;
            save_table(&table, &out)?;
            println!(
                "wrote {} simulations ({} parameters, {} summaries) to {}",
                table.n_sims(),
                table.param_dim(),
                table.summary_dim(),
                out.display()
            );
            Ok(())
        }
        Command::TestData { model, n_test, out } => {
            let mut config = model.to_config()?;
            config.n_test = n_test;
            let tests = generate_test_data(&config)?;
            let mut w = BufWriter::new(std::fs::File::create(&out)?);
            let d = tests[0].truth.len();
            let n_obs = tests[0].observations.len();
            let header: Vec<String> = std::iter::once("test_idx".to_string())
                .chain((1..=d).map(|j| format!("theta_{j}")))
                .chain((1..=n_obs).map(|j| format!("y_{j}")))
                .collect();
            writeln!(w, "{}", header.join(","))?;
            for (idx, test) in tests.iter().enumerate() {
                let mut line = idx.to_string();
                for v in test.truth.iter().chain(&test.observations) {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            println!("wrote {} test datasets to {}", tests.len(), out.display());
            Ok(())
        }
        Command::Run { config, seed, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                Error::Config(format!("cannot read {}: {e}", config.display()))
            })?;
            let mut config = ExperimentConfig::parse(&text)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            std::fs::create_dir_all(&out)?;
            let report = run_experiment(&config)?;
            let report_path = out.join("report.csv");
            report.write_csv(std::fs::File::create(&report_path)?)?;
            report.write_timings_csv(std::fs::File::create(out.join("timings.csv"))?)?;
            emit_plot_data(&report, &out)?;
            println!(
                "wrote {} rows ({} tests x {} methods) to {}",
                report.rows.len(),
                config.n_test,
                config.methods.len(),
                report_path.display()
            );
            Ok(())
        }
        Command::PlotData { report, out } => {
            let report = ExperimentReport::read_csv(&report)?;
            let files = emit_plot_data(&report, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Transform {
            table,
            method,
            components,
            seed,
            out,
            apply,
            transformed,
        } => {
            let table = load_table(&table)?;
            let prepared = PreparedTable::prepare(table)?;
            let spec = match method.as_str() {
                "identity" => MethodSpec::Identity,
                "regression" => MethodSpec::Regression,
                "pls" => MethodSpec::Pls {
                    components: match components {
                        Some(k) => ComponentChoice::Fixed(k),
                        None => ComponentChoice::CrossValidated,
                    },
                },
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown transformation '{other}' (expected identity, regression or pls)"
                    )))
                }
            };
            let mut cv = crate::projections::CvConfig::default();
            cv.fold_seed = seed;
            let transformation = make_global_transformation(&prepared, &spec, &cv)?;

            let bundle = TransformBundle {
                preprocessor: prepared.preprocessor().clone(),
                transformation: transformation.clone(),
            };
            let json = serde_json::to_string_pretty(&bundle)
                .map_err(|e| Error::Format(format!("bundle serialization failed: {e}")))?;
            std::fs::write(&out, json)?;
            println!(
                "wrote {} -> {} transformation to {}",
                transformation.input_dim(),
                transformation.output_dim(),
                out.display()
            );

            if let Some(apply) = apply {
                let transformed = transformed.ok_or_else(|| {
                    Error::InvalidArgument("--apply needs --transformed for the output".into())
                })?;
                let reader = std::io::BufReader::new(std::fs::File::open(&apply)?);
                let mut w = BufWriter::new(std::fs::File::create(&transformed)?);
                let p = transformation.output_dim();
                let header: Vec<String> = (1..=p).map(|j| format!("t_{j}")).collect();
                writeln!(w, "{}", header.join(","))?;
                for (line_no, line) in reader.lines().enumerate() {
                    let line = line?;
                    let trimmed = line.trim();
                    if trimmed.is_empty()
                        || trimmed.starts_with('#')
                        || trimmed.starts_with("s_")
                    {
                        continue;
                    }
                    let raw: Vec<f64> = trimmed
                        .split(',')
                        .map(|f| {
                            f.trim().parse().map_err(|_| Error::Parse {
                                path: apply.display().to_string(),
                                line: line_no + 1,
                                msg: format!("bad number '{f}'"),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let pre = prepared.preprocess_observed(&raw)?;
                    let values = transformation.apply(&pre.values)?;
                    let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                    writeln!(w, "{}", line.join(","))?;
                }
                w.flush()?;
                println!("wrote transformed vectors to {}", transformed.display());
            }
            Ok(())
        }
    }
}

/// Everything needed to replay a transformation on new raw summaries.
#[derive(Debug, Serialize, Deserialize)]
struct TransformBundle {
    preprocessor: crate::summaries::Preprocessor,
    transformation: crate::projections::Transformation,
}
