//! The experiment runner: simulate a table, fit the preprocessing and
//! global transformations once, then run every requested method against
//! every test dataset and collect accuracy results.
//!
//! The whole run is a pure function of the config (including its master
//! seed): simulations, test data and cross-validation folds all draw from
//! seeds derived per index, so worker count never changes a number.

mod config;
mod report;

pub use config::{
    ExperimentConfig, GkSettings, Method, Model, RegInitial, RickerSettings, ToySettings,
};
pub use report::{
    emit_plot_data, quantile, ChosenLambda, ExperimentReport, ReportRow, RowOutcome,
};

use crate::error::{Error, Result};
use crate::inference::{
    default_local_alpha, fit_local_projection, make_global_transformation,
    optimize_local_projection, rejection_abc, rmse, srmse, CandidateGrid, ComponentChoice,
    InitialFamily, MethodParams, MethodSpec, OptimizedLocalProjection, PosteriorSample,
    PreparedTable, TransformationParams,
};
use crate::projections::Transformation;
use crate::rng::{derive_seed, streams};
use crate::simulators::{
    gk_default_prior, ricker_default_prior, sample_prior, simulate_gk, simulate_ricker,
    simulate_toy, toy_default_prior, GkParams, PriorSpec, RickerParams,
};
use crate::summaries::{gk_summaries, gk_summary_names, ricker_summaries, ricker_summary_names};
use crate::table::{SimulationTable, TableMeta};
use ndarray::Array2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// One observed dataset with known true parameters.
#[derive(Debug, Clone)]
pub struct TestDataset {
    /// True parameters, in table coordinates.
    pub truth: Vec<f64>,
    pub observations: Vec<f64>,
    pub raw_summaries: Vec<f64>,
}

/// The prior an experiment actually samples from.
pub fn effective_prior(config: &ExperimentConfig) -> PriorSpec {
    config.prior.clone().unwrap_or_else(|| match config.model {
        Model::Ricker => ricker_default_prior(),
        Model::Gk => gk_default_prior(),
        Model::Toy => toy_default_prior(),
    })
}

pub fn param_names(model: Model) -> Vec<String> {
    match model {
        Model::Ricker => vec!["log_r".into(), "log_sigma_e".into(), "phi".into()],
        Model::Gk => vec!["A".into(), "B".into(), "g".into(), "k".into()],
        Model::Toy => vec!["theta".into()],
    }
}

fn summary_names(config: &ExperimentConfig) -> Vec<String> {
    match config.model {
        Model::Ricker => ricker_summary_names(),
        Model::Gk => gk_summary_names(config.gk.n_quantiles),
        Model::Toy => vec!["s".into()],
    }
}

/// Simulates one dataset and its candidate summaries. Retries with a fresh
/// derived stream on simulation failure (overflown latent states) so a rare
/// failure does not bias the table; retries are counted by the caller.
fn simulate_summaries(
    config: &ExperimentConfig,
    theta: &[f64],
    sim_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const RETRY_TAG: u64 = 5;
    let mut attempt = 0u64;
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(sim_seed, RETRY_TAG, attempt));
        let result: Result<Vec<f64>> = match config.model {
            Model::Ricker => {
                let params = RickerParams::from_vector(theta)?;
                simulate_ricker(&params, config.ricker.steps, config.ricker.burn_in, &mut rng)
            }
            Model::Gk => {
                let params = GkParams::from_vector(theta)?;
                Ok(simulate_gk(&params, config.gk.n_obs, &mut rng))
            }
            Model::Toy => Ok(vec![simulate_toy(theta[0], config.toy.noise_sd, &mut rng)]),
        };
        match result {
            Ok(observations) => {
                let summaries = match config.model {
                    Model::Ricker => ricker_summaries(&observations)?,
                    Model::Gk => gk_summaries(&observations, config.gk.n_quantiles)?,
                    Model::Toy => observations.clone(),
                };
                return Ok((observations, summaries));
            }
            Err(Error::SimulationFailure(reason)) => {
                attempt += 1;
                if attempt >= 100 {
                    return Err(Error::SimulationFailure(format!(
                        "simulation kept failing after {attempt} attempts: {reason}"
                    )));
                }
                log::warn!("simulation failed ({reason}); retrying with a fresh stream");
            }
            Err(e) => return Err(e),
        }
    }
}

/// Simulates a table of `config.n_sims` draws from the prior.
pub fn generate_table(config: &ExperimentConfig) -> Result<SimulationTable> {
    let prior = effective_prior(config);
    let names = param_names(config.model);
    if prior.dim() != names.len() {
        return Err(Error::Config(format!(
            "prior has {} components, the {} model needs {}",
            prior.dim(),
            config.model.name(),
            names.len()
        )));
    }

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..config.n_sims)
        .into_par_iter()
        .map(|i| {
            let sim_seed = derive_seed(config.seed, streams::TABLE_SIM, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(sim_seed);
            let theta = sample_prior(&prior, &mut rng);
            let (_, summaries) = simulate_summaries(config, &theta, sim_seed)?;
            Ok((theta, summaries))
        })
        .collect::<Result<Vec<_>>>()?;

    let d = names.len();
    let q = rows[0].1.len();
    let mut params = Array2::zeros((config.n_sims, d));
    let mut summaries = Array2::zeros((config.n_sims, q));
    for (i, (theta, s)) in rows.into_iter().enumerate() {
        params
            .row_mut(i)
            .assign(&ndarray::ArrayView1::from(&theta));
        summaries.row_mut(i).assign(&ndarray::ArrayView1::from(&s));
    }
    SimulationTable::new(
        params,
        summaries,
        TableMeta::new(
            config.model.name(),
            prior,
            config.seed,
            names,
            summary_names(config),
        ),
    )
}

/// Generates the test datasets for a config, per the model's protocol.
///
/// Ricker: fixed `log r` and `phi`, `log sigma_e` on an even grid over its
/// prior range (endpoints included). g-and-k: one fixed parameter vector,
/// fresh data per test. Toy: one fixed theta, fresh noise per test.
pub fn generate_test_data(config: &ExperimentConfig) -> Result<Vec<TestDataset>> {
    (0..config.n_test)
        .map(|t| {
            let truth: Vec<f64> = match config.model {
                Model::Ricker => {
                    let (lo, hi) = (0.1f64.ln(), 0.0);
                    let log_sigma = if config.n_test == 1 {
                        lo
                    } else {
                        lo + t as f64 * (hi - lo) / (config.n_test - 1) as f64
                    };
                    vec![config.ricker.true_log_r, log_sigma, config.ricker.true_phi]
                }
                Model::Gk => config.gk.true_params.to_vec(),
                Model::Toy => vec![config.toy.true_theta],
            };
            let test_seed = derive_seed(config.seed, streams::TEST_DATA, t as u64);
            let (observations, raw_summaries) =
                simulate_summaries(config, &truth, test_seed)?;
            Ok(TestDataset {
                truth,
                observations,
                raw_summaries,
            })
        })
        .collect()
}

/// Global fits shared by every test dataset of a run.
struct SharedFits {
    regression: Option<Transformation>,
    /// Global PLS with CV-selected components, plus the chosen count.
    pls_cv: Option<(Transformation, usize)>,
    /// Global PLS at the maximum component count; both the validation
    /// transformation and the truncation base for optimized PLS methods.
    pls_max: Option<Transformation>,
}

impl SharedFits {
    fn build(prepared: &PreparedTable, config: &ExperimentConfig) -> Result<Self> {
        use Method::*;
        let cv = config.cv_config();
        let needs_reg = config
            .methods
            .iter()
            .any(|m| matches!(m, Reg | LocalReg | LocalRegOpt));
        let needs_pls_cv = config.methods.iter().any(|m| matches!(m, Pls | LocalPls));
        let needs_pls_max = config
            .methods
            .iter()
            .any(|m| matches!(m, PlsOpt | LocalPlsOpt));

        let regression = if needs_reg {
            Some(make_global_transformation(
                prepared,
                &MethodSpec::Regression,
                &cv,
            )?)
        } else {
            None
        };
        let pls_cv = if needs_pls_cv {
            let t = make_global_transformation(
                prepared,
                &MethodSpec::Pls {
                    components: ComponentChoice::CrossValidated,
                },
                &cv,
            )?;
            let k = t.n_components().expect("PLS fit has components");
            Some((t, k))
        } else {
            None
        };
        let pls_max = if needs_pls_max {
            let cap = config
                .max_components
                .min(prepared.input_dim())
                .min(prepared.n_sims() - 1);
            Some(make_global_transformation(
                prepared,
                &MethodSpec::Pls {
                    components: ComponentChoice::Fixed(cap),
                },
                &cv,
            )?)
        } else {
            None
        };
        Ok(Self {
            regression,
            pls_cv,
            pls_max,
        })
    }
}

struct MethodRun {
    posterior: PosteriorSample,
    chosen: ChosenLambda,
    diagnostics: Option<crate::inference::Diagnostics>,
}

fn run_method(
    prepared: &PreparedTable,
    shared: &SharedFits,
    config: &ExperimentConfig,
    method: Method,
    s_obs_pre: &[f64],
) -> Result<MethodRun> {
    let cv = config.cv_config();
    let n = prepared.n_sims();
    let n_final = config.opt.n_final;
    let identity = Transformation::identity(prepared.input_dim());
    let reg_f1 = match config.reg_initial {
        RegInitial::Regression => shared.regression.as_ref(),
        RegInitial::Identity => Some(&identity),
    };

    match method {
        Method::Reg => {
            let t = shared.regression.as_ref().expect("built for Reg");
            let posterior = rejection_abc(prepared, t, s_obs_pre, n_final, &[])?;
            Ok(MethodRun {
                posterior,
                chosen: ChosenLambda::default(),
                diagnostics: None,
            })
        }
        Method::Pls => {
            let (t, k) = shared.pls_cv.as_ref().expect("built for PLS");
            let posterior = rejection_abc(prepared, t, s_obs_pre, n_final, &[])?;
            Ok(MethodRun {
                posterior,
                chosen: ChosenLambda {
                    local_components: Some(*k),
                    ..ChosenLambda::default()
                },
                diagnostics: None,
            })
        }
        Method::LocalReg => {
            let f1 = reg_f1.expect("built for reg methods");
            let alpha = default_local_alpha(n);
            let lambda = TransformationParams {
                alpha,
                method: MethodParams::Regression,
                initial_components: None,
            };
            let t = fit_local_projection(prepared, f1, &lambda, s_obs_pre, &cv)?;
            let posterior = rejection_abc(prepared, &t, s_obs_pre, n_final, &[])?;
            Ok(MethodRun {
                posterior,
                chosen: ChosenLambda {
                    alpha: Some(alpha),
                    ..ChosenLambda::default()
                },
                diagnostics: None,
            })
        }
        Method::LocalPls => {
            let (f1, k_init) = shared.pls_cv.as_ref().expect("built for localPLS");
            let alpha = default_local_alpha(n);
            let lambda = TransformationParams {
                alpha,
                method: MethodParams::Pls {
                    components: ComponentChoice::CrossValidated,
                },
                initial_components: Some(*k_init),
            };
            let t = fit_local_projection(prepared, f1, &lambda, s_obs_pre, &cv)?;
            let chosen = ChosenLambda {
                alpha: Some(alpha),
                local_components: t.n_components(),
                initial_components: Some(*k_init),
            };
            let posterior = rejection_abc(prepared, &t, s_obs_pre, n_final, &[])?;
            Ok(MethodRun {
                posterior,
                chosen,
                diagnostics: None,
            })
        }
        Method::LocalRegOpt => {
            let fv = shared.regression.as_ref().expect("built for localRegopt");
            let f1 = reg_f1.expect("built for reg methods");
            let grid = CandidateGrid::regression_grid(&config.alpha_grid)?;
            let out = optimize_local_projection(
                prepared,
                fv,
                InitialFamily::Fixed(f1),
                &grid,
                &config.opt,
                s_obs_pre,
                &cv,
            )?;
            finish_optimized(prepared, out, s_obs_pre, n_final)
        }
        Method::PlsOpt => {
            let base = shared.pls_max.as_ref().expect("built for PLSopt");
            let k_base = base.n_components().expect("PLS fit has components");
            let components: Vec<usize> = config
                .pls_components_grid
                .iter()
                .copied()
                .filter(|&k| k <= k_base)
                .collect();
            let grid = CandidateGrid::global_pls_grid(&components, k_base)?;
            let out = optimize_local_projection(
                prepared,
                base,
                InitialFamily::PlsTruncations(base),
                &grid,
                &config.opt,
                s_obs_pre,
                &cv,
            )?;
            finish_optimized(prepared, out, s_obs_pre, n_final)
        }
        Method::LocalPlsOpt => {
            let base = shared.pls_max.as_ref().expect("built for localPLSopt");
            let k_base = base.n_components().expect("PLS fit has components");
            let components: Vec<usize> = config
                .pls_components_grid
                .iter()
                .copied()
                .filter(|&k| k <= k_base)
                .collect();
            let grid = CandidateGrid::pls_grid(&config.alpha_grid, &components, &components)?;
            let out = optimize_local_projection(
                prepared,
                base,
                InitialFamily::PlsTruncations(base),
                &grid,
                &config.opt,
                s_obs_pre,
                &cv,
            )?;
            finish_optimized(prepared, out, s_obs_pre, n_final)
        }
    }
}

fn finish_optimized(
    prepared: &PreparedTable,
    out: OptimizedLocalProjection,
    s_obs_pre: &[f64],
    n_final: usize,
) -> Result<MethodRun> {
    let posterior = rejection_abc(prepared, &out.transformation, s_obs_pre, n_final, &[])?;
    let chosen = ChosenLambda {
        alpha: Some(out.chosen.alpha),
        local_components: match out.chosen.method {
            MethodParams::Pls {
                components: ComponentChoice::Fixed(k),
            } => Some(k),
            MethodParams::Pls {
                components: ComponentChoice::CrossValidated,
            } => out.transformation.n_components(),
            MethodParams::Regression => None,
        },
        initial_components: out.chosen.initial_components,
    };
    Ok(MethodRun {
        posterior,
        chosen,
        diagnostics: Some(out.diagnostics),
    })
}

/// Runs a full experiment: table, preprocessing, global fits, then every
/// (test dataset, method) pair. Failures are recorded per pair, never
/// dropped.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let table = match &config.table {
        Some(path) => crate::io::load_table(path)?,
        None => generate_table(config)?,
    };
    let n_sims = table.n_sims();
    let n_summaries = table.summary_dim();
    let names = if table.meta().param_names.is_empty() {
        (1..=table.param_dim()).map(|j| format!("theta_{j}")).collect()
    } else {
        table.meta().param_names.clone()
    };

    let prepared = PreparedTable::prepare(table)?;
    let shared = SharedFits::build(&prepared, config)?;
    let tests = generate_test_data(config)?;

    if let Some(dir) = &config.diagnostics_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rows = Vec::with_capacity(tests.len() * config.methods.len());
    for (test_idx, test) in tests.iter().enumerate() {
        let pre = prepared.preprocess_observed(&test.raw_summaries)?;
        if pre.out_of_support {
            log::warn!(
                "test dataset {test_idx}: observed summary outside the table's nonnegative \
                 support; square root skipped for the offending columns"
            );
        }
        for &method in &config.methods {
            let started = Instant::now();
            let outcome = match run_method(&prepared, &shared, config, method, &pre.values) {
                Ok(run) => {
                    if let (Some(dir), Some(diag)) = (&config.diagnostics_dir, &run.diagnostics)
                    {
                        let base = dir.join(format!("test{test_idx}_{}", method.name()));
                        let surface = std::fs::File::create(base.with_extension("surface.csv"))?;
                        diag.write_surface_csv(surface)?;
                        let valid = std::fs::File::create(base.with_extension("ivalid.csv"))?;
                        diag.write_validation_csv(valid)?;
                    }
                    let srmse_value = srmse(&run.posterior, &test.truth)?;
                    let rmse_values: Vec<f64> = (0..test.truth.len())
                        .map(|j| {
                            let col: Vec<f64> = run.posterior.params().column(j).to_vec();
                            rmse(&col, test.truth[j])
                        })
                        .collect::<Result<Vec<_>>>()?;
                    RowOutcome::Ok {
                        srmse: srmse_value,
                        rmse: rmse_values,
                        chosen: run.chosen,
                    }
                }
                Err(e) => {
                    log::warn!("test {test_idx}, method {}: {e}", method.name());
                    RowOutcome::Failed {
                        reason: e.to_string(),
                    }
                }
            };
            rows.push(ReportRow {
                test_idx,
                method,
                outcome,
                wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
    }

    Ok(ExperimentReport {
        model: config.model.name().to_string(),
        n_sims,
        n_summaries,
        param_names: names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::defaults_for(Model::Toy);
        config.n_sims = 1000;
        config.n_test = 3;
        config.seed = 11;
        config.methods = vec![Method::Reg];
        config
    }

    #[test]
    fn toy_smoke_run_produces_finite_rows() {
        let report = run_experiment(&toy_config()).unwrap();
        assert_eq!(report.rows.len(), 3);
        for row in &report.rows {
            match &row.outcome {
                RowOutcome::Ok { srmse, rmse, .. } => {
                    assert!(srmse.is_finite());
                    assert_eq!(rmse.len(), 1);
                }
                RowOutcome::Failed { reason } => panic!("unexpected failure: {reason}"),
            }
        }
    }

    #[test]
    fn identical_seeds_give_byte_identical_reports() {
        let config = toy_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_csv(&mut buf_a).unwrap();
        b.write_csv(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn ricker_test_grid_spans_the_noise_range_inclusively() {
        let mut config = ExperimentConfig::defaults_for(Model::Ricker);
        config.n_test = 5;
        let tests = generate_test_data(&config).unwrap();
        assert_eq!(tests.len(), 5);
        let lo = 0.1f64.ln();
        assert!((tests[0].truth[1] - lo).abs() < 1e-12);
        assert!(tests[4].truth[1].abs() < 1e-12);
        for t in &tests {
            assert_eq!(t.truth[0], 3.8);
            assert_eq!(t.truth[2], 10.0);
            assert_eq!(t.observations.len(), 50);
            assert_eq!(t.raw_summaries.len(), 124);
        }
    }

    #[test]
    fn gk_tests_share_the_true_parameters_but_not_the_data() {
        let mut config = ExperimentConfig::defaults_for(Model::Gk);
        config.n_test = 3;
        config.gk.n_obs = 500;
        config.gk.n_quantiles = 10;
        let tests = generate_test_data(&config).unwrap();
        assert_eq!(tests[0].truth, vec![3.0, 1.0, 2.0, 0.5]);
        assert_eq!(tests[1].truth, tests[0].truth);
        assert_ne!(tests[0].observations, tests[1].observations);
    }

    #[test]
    fn generated_tables_carry_metadata() {
        let mut config = ExperimentConfig::defaults_for(Model::Gk);
        config.n_sims = 50;
        config.gk.n_obs = 200;
        config.gk.n_quantiles = 10;
        let table = generate_table(&config).unwrap();
        assert_eq!(table.n_sims(), 50);
        assert_eq!(table.param_dim(), 4);
        assert_eq!(table.summary_dim(), 10);
        assert_eq!(table.meta().model, "gk");
        assert_eq!(table.meta().param_names.len(), 4);
        assert_eq!(table.meta().summary_names.len(), 10);
    }
}
