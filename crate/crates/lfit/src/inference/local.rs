//! Localization: fit a projection on the neighborhood of a target.

use crate::error::{Error, Result};
use crate::inference::{
    ComponentChoice, MethodParams, PreparedTable, TransformationParams, MIN_FIT_ROWS,
};
use crate::linalg::{gather_rows, sq_dist_prefix, Moments};
use crate::neighbors::select_k_nearest;
use crate::projections::{
    fit_ols_from_moments, fit_pls_from_moments, select_pls_components, CvConfig, Transformation,
};
use crate::table::IndexSet;

/// Rows in a neighborhood of fraction `alpha`: `round(alpha * n)`, floored
/// at the minimum fit size.
pub fn neighborhood_size(alpha: f64, n: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let k = (alpha * n as f64).round() as usize;
    if k < MIN_FIT_ROWS {
        return Err(Error::TooFewSamples(format!(
            "neighborhood of {k} rows (alpha = {alpha}, n = {n}) is below the minimum fit size {MIN_FIT_ROWS}"
        )));
    }
    Ok(k.min(n))
}

/// Fits a transformation on the `round(alpha * n)` simulations whose
/// initial-transformed summaries are nearest the target.
///
/// Distances are measured after applying `initial` to both the table and
/// `s_obs_pre`; the local fit itself runs on the (preprocessed) summaries.
/// The returned transformation records the neighborhood as its fit rows.
pub fn fit_local_projection(
    prepared: &PreparedTable,
    initial: &Transformation,
    lambda: &TransformationParams,
    s_obs_pre: &[f64],
    cv: &CvConfig,
) -> Result<Transformation> {
    let n = prepared.n_sims();
    let k_rows = neighborhood_size(lambda.alpha, n)?;

    let z = initial.apply_matrix(prepared.summaries_pre())?;
    let z_obs = initial.apply(s_obs_pre)?;
    let d2 = sq_dist_prefix(z.view(), &z_obs, z_obs.len());
    let neighborhood = select_k_nearest(&d2, k_rows)?;

    fit_on_rows(prepared, neighborhood, lambda.method, cv)
}

/// Fits `method` on the given rows (in the order of the index set) and
/// stamps the result with the rows and the preprocessor fingerprint.
pub(crate) fn fit_on_rows(
    prepared: &PreparedTable,
    rows: IndexSet,
    method: MethodParams,
    cv: &CvConfig,
) -> Result<Transformation> {
    let pre = prepared.summaries_pre();
    let params = prepared.table().params();
    let q = prepared.input_dim();
    let n_rows = rows.len();
    if n_rows < MIN_FIT_ROWS {
        return Err(Error::TooFewSamples(format!(
            "{n_rows} rows is below the minimum fit size {MIN_FIT_ROWS}"
        )));
    }

    let t = match method {
        MethodParams::Regression => {
            let moments = Moments::from_rows(pre, params, rows.iter()).centered();
            fit_ols_from_moments(&moments)
        }
        MethodParams::Pls { components } => {
            let k = match components {
                ComponentChoice::Fixed(k) => k,
                ComponentChoice::CrossValidated => {
                    let sub_s = gather_rows(pre, rows.as_slice());
                    let sub_t = gather_rows(params, rows.as_slice());
                    select_pls_components(sub_s.view(), sub_t.view(), cv)?
                }
            };
            let cap = (n_rows - 1).min(q);
            if k == 0 || k > cap {
                return Err(Error::InvalidArgument(format!(
                    "{k} components infeasible on a neighborhood of {n_rows} rows ({q} summaries)"
                )));
            }
            let moments = Moments::from_rows(pre, params, rows.iter()).centered();
            fit_pls_from_moments(&moments, k)
        }
    };
    Ok(t
        .with_fit_rows(rows)
        .with_preproc_id(prepared.preprocessor().fingerprint()))
}
