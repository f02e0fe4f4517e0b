//! Optimizing the localization parameters against validation simulations.
//!
//! The optimizer draws the `n_valid` simulations nearest the observed data
//! (under a fixed initial transformation `f_v`) and treats them as stand-in
//! observed datasets with known parameters. Every candidate setting is
//! scored by running the full localize-then-ABC pipeline against each
//! validation row and summing the resulting posterior errors; the winner is
//! refitted targeting the real observed data.
//!
//! Scoring a grid naively costs one local fit and one table scan per
//! (candidate, validation row). The loop below exploits three structural
//! facts to share work *without changing any result bit*:
//!
//! * neighborhoods for nested `alpha` values are prefixes of one
//!   distance-sorted row order, and moment accumulation along that order
//!   can be snapshotted at each cutoff;
//! * a SIMPLS fit with the largest candidate component count contains the
//!   fits for all smaller counts as leading weight columns;
//! * distances in a `k`-component score space are prefix sums over score
//!   columns, so one score matrix serves every smaller count.

use crate::error::{Error, Result};
use crate::inference::local::{fit_local_projection, fit_on_rows, neighborhood_size};
use crate::inference::{
    srmse_of_columns, CandidateGrid, ComponentChoice, MethodParams, OptimizationConfig,
    PreparedTable, TransformationParams,
};
use crate::linalg::{gather_rows, sq_dist_prefix, sq_dist_prefix_into, Moments};
use crate::neighbors::{select_k_nearest, select_k_nearest_scratch, sort_by_distance};
use crate::projections::{fit_ols_from_moments, fit_pls_from_moments, CvConfig, Transformation};
use crate::table::IndexSet;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// How the optimizer builds the initial transformation `f_1` used for
/// localization.
#[derive(Debug, Clone, Copy)]
pub enum InitialFamily<'a> {
    /// The same transformation for every candidate; candidates'
    /// `initial_components` are ignored.
    Fixed(&'a Transformation),
    /// Truncations of one PLS fit: each candidate's `initial_components`
    /// selects the leading components of this transformation.
    PlsTruncations(&'a Transformation),
}

/// Outcome of one candidate evaluation.
#[derive(Debug, Clone)]
pub enum LambdaOutcome {
    Evaluated {
        /// Sum of posterior SRMSEs over the validation rows.
        srmse_sum: f64,
        /// SRMSE per validation row, ordered like `i_valid`.
        per_row: Vec<f64>,
        /// Accepted indices per validation row, ordered like `i_valid`.
        posteriors: Vec<IndexSet>,
    },
    Skipped { reason: String },
}

/// One grid entry with its evaluation outcome.
#[derive(Debug, Clone)]
pub struct LambdaEvaluation {
    pub params: TransformationParams,
    pub outcome: LambdaOutcome,
}

/// The full evaluation record of one optimizer run.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Validation rows, nearest first.
    pub i_valid: IndexSet,
    /// One evaluation per grid entry, in grid order.
    pub lambdas: Vec<LambdaEvaluation>,
    /// Index of the winning entry.
    pub chosen_index: usize,
}

impl Diagnostics {
    /// Writes the SRMSE surface as CSV: one row per candidate.
    pub fn write_surface_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "lambda_idx",
            "alpha",
            "method",
            "local_components",
            "initial_components",
            "status",
            "reason",
            "srmse_sum",
            "chosen",
        ])
        .map_err(csv_err)?;
        for (idx, eval) in self.lambdas.iter().enumerate() {
            let p = &eval.params;
            let (method, comps) = match p.method {
                MethodParams::Regression => ("regression", String::new()),
                MethodParams::Pls { components } => (
                    "pls",
                    match components {
                        ComponentChoice::Fixed(k) => k.to_string(),
                        ComponentChoice::CrossValidated => "cv".to_string(),
                    },
                ),
            };
            let initial = p
                .initial_components
                .map(|k| k.to_string())
                .unwrap_or_default();
            let (status, reason, srmse) = match &eval.outcome {
                LambdaOutcome::Evaluated { srmse_sum, .. } => {
                    ("evaluated", String::new(), srmse_sum.to_string())
                }
                LambdaOutcome::Skipped { reason } => ("skipped", reason.clone(), String::new()),
            };
            w.write_record([
                idx.to_string(),
                p.alpha.to_string(),
                method.to_string(),
                comps,
                initial,
                status.to_string(),
                reason,
                srmse,
                ((idx == self.chosen_index) as u8).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the validation rows as CSV: rank (nearest first) and row index.
    pub fn write_validation_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "row_index"]).map_err(csv_err)?;
        for (rank, row) in self.i_valid.iter().enumerate() {
            w.write_record([rank.to_string(), row.to_string()])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv write failed: {e}"))
}

/// Result of [`optimize_local_projection`].
#[derive(Debug, Clone)]
pub struct OptimizedLocalProjection {
    /// The final transformation, fitted with the winning candidate
    /// targeting the observed data.
    pub transformation: Transformation,
    pub chosen: TransformationParams,
    pub chosen_index: usize,
    pub diagnostics: Diagnostics,
}

enum Plan {
    Feasible { k_rows: usize, init_dims: usize },
    Skipped(String),
}

/// Chooses localization parameters by exhaustive search over `grid`.
///
/// For every feasible candidate and every validation row, a local
/// transformation targeting that row is fitted (with `f_1` built per the
/// initial family), a posterior of `cfg.n_post` simulations is drawn with
/// the row itself excluded, and its summed RMSE against the row's true
/// parameters is accumulated. The candidate with the smallest total wins;
/// ties go to the earlier grid position. The returned transformation is the
/// winner refitted targeting `s_obs_pre`.
pub fn optimize_local_projection(
    prepared: &PreparedTable,
    fv: &Transformation,
    initial: InitialFamily<'_>,
    grid: &CandidateGrid,
    cfg: &OptimizationConfig,
    s_obs_pre: &[f64],
    cv: &CvConfig,
) -> Result<OptimizedLocalProjection> {
    let n = prepared.n_sims();
    let q = prepared.input_dim();
    if cfg.n_valid == 0 || cfg.n_post == 0 {
        return Err(Error::InvalidArgument(
            "n_valid and n_post must be positive".into(),
        ));
    }
    if cfg.n_valid + cfg.n_post > n {
        return Err(Error::InvalidArgument(format!(
            "n_valid + n_post = {} exceeds the table size {n}",
            cfg.n_valid + cfg.n_post
        )));
    }

    // Validation rows: nearest to the observed data under f_v.
    let i_valid = {
        let z = fv.apply_matrix(prepared.summaries_pre())?;
        let obs = fv.apply(s_obs_pre)?;
        let d2 = sq_dist_prefix(z.view(), &obs, obs.len());
        select_k_nearest(&d2, cfg.n_valid)?
    };

    // Scores under the initial transformation(s). For a PLS family one
    // matrix at the maximum component count serves every candidate via
    // column prefixes.
    let (init_base, init_scores): (&Transformation, Array2<f64>) = match initial {
        InitialFamily::Fixed(t) => (t, t.apply_matrix(prepared.summaries_pre())?),
        InitialFamily::PlsTruncations(t) => {
            if t.n_components().is_none() {
                return Err(Error::InvalidArgument(
                    "PlsTruncations needs a PLS initial transformation".into(),
                ));
            }
            (t, t.apply_matrix(prepared.summaries_pre())?)
        }
    };
    let base_dims = init_scores.ncols();

    // Feasibility screen.
    let plans: Vec<Plan> = grid
        .items()
        .iter()
        .map(|lambda| {
            let init_dims = match initial {
                InitialFamily::Fixed(_) => base_dims,
                InitialFamily::PlsTruncations(_) => match lambda.initial_components {
                    Some(k) if k <= base_dims => k,
                    Some(k) => {
                        return Plan::Skipped(format!(
                            "initial components {k} exceed the {base_dims} available"
                        ))
                    }
                    None => {
                        return Plan::Skipped(
                            "candidate lacks an initial component count".into(),
                        )
                    }
                },
            };
            let k_rows = match neighborhood_size(lambda.alpha, n) {
                Ok(k) => k,
                Err(e) => return Plan::Skipped(e.to_string()),
            };
            match lambda.method {
                MethodParams::Regression => {}
                MethodParams::Pls {
                    components: ComponentChoice::Fixed(k),
                } => {
                    let cap = (k_rows - 1).min(q);
                    if k > cap {
                        return Plan::Skipped(format!(
                            "{k} components infeasible on {k_rows} rows ({q} summaries)"
                        ));
                    }
                }
                MethodParams::Pls {
                    components: ComponentChoice::CrossValidated,
                } => {
                    if k_rows < cv.folds {
                        return Plan::Skipped(format!(
                            "{k_rows} rows cannot be split into {} folds",
                            cv.folds
                        ));
                    }
                }
            }
            Plan::Feasible { k_rows, init_dims }
        })
        .collect();

    for (lambda, plan) in grid.items().iter().zip(&plans) {
        if let Plan::Skipped(reason) = plan {
            log::debug!("skipping candidate {lambda:?}: {reason}");
        }
    }
    if !plans.iter().any(|p| matches!(p, Plan::Feasible { .. })) {
        return Err(Error::InvalidArgument(
            "every candidate in the grid is infeasible on this table".into(),
        ));
    }

    // Group feasible candidates: initial dims -> neighborhood rows -> entries.
    let mut groups: BTreeMap<usize, BTreeMap<usize, Vec<usize>>> = BTreeMap::new();
    for (idx, plan) in plans.iter().enumerate() {
        if let Plan::Feasible { k_rows, init_dims } = plan {
            groups
                .entry(*init_dims)
                .or_default()
                .entry(*k_rows)
                .or_default()
                .push(idx);
        }
    }

    // Largest transformed dimension any candidate produces; sizes the
    // per-row score buffer.
    let d = prepared.table().param_dim();
    let mut max_dims = 1usize;
    for (plan, lambda) in plans.iter().zip(grid.items()) {
        if matches!(plan, Plan::Feasible { .. }) {
            let dims = match lambda.method {
                MethodParams::Regression => d,
                MethodParams::Pls {
                    components: ComponentChoice::Fixed(k),
                } => k,
                MethodParams::Pls {
                    components: ComponentChoice::CrossValidated,
                } => cv.max_components.min(q),
            };
            max_dims = max_dims.max(dims);
        }
    }

    // Score every feasible candidate against every validation row.
    let per_row_results: Vec<Vec<Option<(f64, IndexSet)>>> = i_valid
        .as_slice()
        .par_iter()
        .map(|&row| evaluate_row(prepared, row, &groups, grid, cfg, cv, &init_scores, max_dims))
        .collect::<Result<Vec<_>>>()?;

    // Reduce in grid order.
    let mut lambdas = Vec::with_capacity(grid.len());
    for (idx, plan) in plans.iter().enumerate() {
        let outcome = match plan {
            Plan::Skipped(reason) => LambdaOutcome::Skipped {
                reason: reason.clone(),
            },
            Plan::Feasible { .. } => {
                let mut per_row = Vec::with_capacity(cfg.n_valid);
                let mut posteriors = Vec::with_capacity(cfg.n_valid);
                for row_result in &per_row_results {
                    let (srmse, posterior) = row_result[idx]
                        .clone()
                        .expect("feasible candidates are evaluated for every row");
                    per_row.push(srmse);
                    posteriors.push(posterior);
                }
                LambdaOutcome::Evaluated {
                    srmse_sum: per_row.iter().sum(),
                    per_row,
                    posteriors,
                }
            }
        };
        lambdas.push(LambdaEvaluation {
            params: grid.items()[idx],
            outcome,
        });
    }

    let mut best: Option<(f64, usize)> = None;
    for (idx, eval) in lambdas.iter().enumerate() {
        if let LambdaOutcome::Evaluated { srmse_sum, .. } = eval.outcome {
            if best.map_or(true, |(s, _)| srmse_sum < s) {
                best = Some((srmse_sum, idx));
            }
        }
    }
    let (_, chosen_index) = best.expect("at least one candidate evaluated");
    let chosen = grid.items()[chosen_index];

    // Refit the winner targeting the actual observed data.
    let f1_final = match initial {
        InitialFamily::Fixed(t) => t.clone(),
        InitialFamily::PlsTruncations(_) => init_base.truncated(
            chosen
                .initial_components
                .expect("feasible PLS-family candidates carry initial components"),
        )?,
    };
    let transformation = fit_local_projection(prepared, &f1_final, &chosen, s_obs_pre, cv)?;

    Ok(OptimizedLocalProjection {
        transformation,
        chosen,
        chosen_index,
        diagnostics: Diagnostics {
            i_valid,
            lambdas,
            chosen_index,
        },
    })
}

/// Evaluates every feasible candidate against one validation row.
///
/// Produces exactly the numbers the naive loop — `fit_local_projection`
/// followed by `rejection_abc` per candidate — would produce: row orders,
/// moment accumulation, fits and distance sums all follow the same
/// sequences. Score//distance/selection buffers are allocated once per row
/// and reused across candidates.
#[allow(clippy::too_many_arguments)]
fn evaluate_row(
    prepared: &PreparedTable,
    row: usize,
    groups: &BTreeMap<usize, BTreeMap<usize, Vec<usize>>>,
    grid: &CandidateGrid,
    cfg: &OptimizationConfig,
    cv: &CvConfig,
    init_scores: &Array2<f64>,
    max_dims: usize,
) -> Result<Vec<Option<(f64, IndexSet)>>> {
    let pre = prepared.summaries_pre();
    let params = prepared.table().params();
    let n = prepared.n_sims();
    let q = pre.ncols();
    let d = params.ncols();
    let truth: Vec<f64> = params.row(row).to_vec();
    let mut out: Vec<Option<(f64, IndexSet)>> = vec![None; grid.len()];

    let init_flat = init_scores.as_slice().expect("standard layout");
    let init_stride = init_scores.ncols();
    let mut scores_buf = vec![0.0; n * max_dims];
    let mut d2_buf = vec![0.0; n];
    let mut pool: Vec<(f64, usize)> = Vec::with_capacity(n);

    for (&init_dims, by_cutoff) in groups {
        let target = &init_flat[row * init_stride..row * init_stride + init_dims];
        sq_dist_prefix_into(init_flat, init_stride, target, init_dims, &mut d2_buf);
        let order = sort_by_distance(&d2_buf);

        let mut moments = Moments::new(q, d);
        let mut accumulated = 0usize;
        let mut xbuf = vec![0.0; q];
        let mut ybuf = vec![0.0; d];

        for (&k_rows, entries) in by_cutoff {
            while accumulated < k_rows {
                let r = order[accumulated];
                crate::linalg::copy_row(pre, r, &mut xbuf);
                crate::linalg::copy_row(params, r, &mut ybuf);
                moments.add_row(&xbuf, &ybuf);
                accumulated += 1;
            }
            let centered = moments.centered();

            // Batch the fixed-count PLS candidates: one fit at the largest
            // count, evaluated through column prefixes.
            let mut pls_fixed: Vec<(usize, usize)> = Vec::new();
            for &idx in entries {
                match grid.items()[idx].method {
                    MethodParams::Regression => {
                        let t = fit_ols_from_moments(&centered);
                        t.apply_matrix_into(pre, &mut scores_buf[..n * d]);
                        out[idx] = Some(score_posterior(
                            &scores_buf[..n * d],
                            d,
                            row,
                            d,
                            cfg.n_post,
                            params,
                            &truth,
                            &mut d2_buf,
                            &mut pool,
                        )?);
                    }
                    MethodParams::Pls {
                        components: ComponentChoice::Fixed(k),
                    } => pls_fixed.push((idx, k)),
                    MethodParams::Pls {
                        components: ComponentChoice::CrossValidated,
                    } => {
                        // Rare path: component count chosen on the
                        // neighborhood itself. Falls back to the plain fit.
                        let rows = IndexSet::new(order[..k_rows].to_vec(), n)?;
                        let t = fit_on_rows(prepared, rows, grid.items()[idx].method, cv)?;
                        let p = t.output_dim();
                        t.apply_matrix_into(pre, &mut scores_buf[..n * p]);
                        out[idx] = Some(score_posterior(
                            &scores_buf[..n * p],
                            p,
                            row,
                            p,
                            cfg.n_post,
                            params,
                            &truth,
                            &mut d2_buf,
                            &mut pool,
                        )?);
                    }
                }
            }
            if let Some(&(_, k_max)) = pls_fixed.iter().max_by_key(|&&(_, k)| k) {
                let t_full = fit_pls_from_moments(&centered, k_max);
                t_full.apply_matrix_into(pre, &mut scores_buf[..n * k_max]);
                for &(idx, k) in &pls_fixed {
                    out[idx] = Some(score_posterior(
                        &scores_buf[..n * k_max],
                        k_max,
                        row,
                        k,
                        cfg.n_post,
                        params,
                        &truth,
                        &mut d2_buf,
                        &mut pool,
                    )?);
                }
            }
        }
    }
    Ok(out)
}

/// Draws the posterior for one validation row (excluding the row itself)
/// and scores it against the row's true parameters.
#[allow(clippy::too_many_arguments)]
fn score_posterior(
    scores: &[f64],
    stride: usize,
    row: usize,
    dims: usize,
    n_post: usize,
    params: ArrayView2<'_, f64>,
    truth: &[f64],
    d2: &mut [f64],
    pool: &mut Vec<(f64, usize)>,
) -> Result<(f64, IndexSet)> {
    let obs = &scores[row * stride..row * stride + dims];
    sq_dist_prefix_into(scores, stride, obs, dims, d2);
    let accepted = select_k_nearest_scratch(d2, n_post, |j| j != row, pool)?;
    debug_assert!(
        !accepted.contains(row),
        "validation row leaked into its posterior"
    );
    let accepted_params = gather_rows(params, accepted.as_slice());
    let srmse = srmse_of_columns(accepted_params.view(), truth);
    Ok((srmse, accepted))
}

#[cfg(test)]
pub(crate) fn assert_no_validation_leak(diag: &Diagnostics) {
    for eval in &diag.lambdas {
        if let LambdaOutcome::Evaluated { posteriors, .. } = &eval.outcome {
            for (pos, posterior) in posteriors.iter().enumerate() {
                let row = diag.i_valid.as_slice()[pos];
                assert!(
                    !posterior.contains(row),
                    "validation row {row} appears in its own posterior"
                );
            }
        }
    }
}
