//! Rejection ABC and localized, optimization-validated projections.
//!
//! The entry points are:
//!
//! * [`rejection_abc`] — accept the `n` simulations whose transformed
//!   summaries are nearest the observed ones,
//! * [`fit_local_projection`] — fit a projection only on the neighborhood
//!   of the observed data (under an initial transformation),
//! * [`optimize_local_projection`] — choose the localization parameters by
//!   scoring candidate settings on validation simulations drawn from the
//!   table itself.

mod local;
mod optimize;

pub use local::{fit_local_projection, neighborhood_size};
pub use optimize::{
    optimize_local_projection, Diagnostics, InitialFamily, LambdaEvaluation, LambdaOutcome,
    OptimizedLocalProjection,
};

use crate::error::{Error, Result};
use crate::linalg::{gather_rows, sq_dist_prefix};
use crate::neighbors::select_k_nearest_where;
use crate::projections::{fit_ols, fit_pls, select_pls_components, CvConfig, Transformation};
use crate::summaries::{Preprocessed, Preprocessor};
use crate::table::{IndexSet, SimulationTable};
use ndarray::{Array2, ArrayView2};

/// Fits on fewer rows than this are rejected outright.
pub const MIN_FIT_ROWS: usize = 10;

/// A table with its fitted preprocessor and the preprocessed summary
/// matrix. Everything inference does starts from one of these.
#[derive(Debug, Clone)]
pub struct PreparedTable {
    table: SimulationTable,
    preprocessor: Preprocessor,
    summaries_pre: Array2<f64>,
}

impl PreparedTable {
    /// Fits the preprocessing pipeline and transforms the whole table.
    pub fn prepare(table: SimulationTable) -> Result<Self> {
        let preprocessor = Preprocessor::fit(&table)?;
        let summaries_pre = preprocessor.apply_matrix(table.summaries())?;
        Ok(Self {
            table,
            preprocessor,
            summaries_pre,
        })
    }

    pub fn table(&self) -> &SimulationTable {
        &self.table
    }

    pub fn preprocessor(&self) -> &Preprocessor {
        &self.preprocessor
    }

    /// Preprocessed summaries, `n x q_retained`.
    pub fn summaries_pre(&self) -> ArrayView2<'_, f64> {
        self.summaries_pre.view()
    }

    pub fn n_sims(&self) -> usize {
        self.table.n_sims()
    }

    /// Retained (post-preprocessing) summary dimension.
    pub fn input_dim(&self) -> usize {
        self.summaries_pre.ncols()
    }

    /// Preprocesses raw observed summaries with the table's pipeline.
    pub fn preprocess_observed(&self, raw: &[f64]) -> Result<Preprocessed> {
        self.preprocessor.apply(raw)
    }

    /// One row of preprocessed summaries as a slice.
    pub fn pre_row(&self, i: usize) -> &[f64] {
        self.summaries_pre
            .row(i)
            .to_slice()
            .expect("summaries_pre is row-major")
    }
}

/// How many components a PLS fit uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentChoice {
    Fixed(usize),
    /// Pick by k-fold cross-validation on the fitting rows.
    CrossValidated,
}

/// The projection family fitted on a neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodParams {
    Regression,
    Pls { components: ComponentChoice },
}

/// A candidate localization setting: neighborhood fraction plus method
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformationParams {
    /// Fraction of the table used as the local neighborhood, in (0, 1].
    pub alpha: f64,
    pub method: MethodParams,
    /// Component count for the initial transformation, when the optimizer
    /// rebuilds it per candidate (PLS-family localization only).
    pub initial_components: Option<usize>,
}

impl TransformationParams {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if let MethodParams::Pls {
            components: ComponentChoice::Fixed(k),
        } = self.method
        {
            if k == 0 {
                return Err(Error::InvalidArgument("component count must be >= 1".into()));
            }
        }
        if let Some(k) = self.initial_components {
            if k == 0 {
                return Err(Error::InvalidArgument(
                    "initial component count must be >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// An ordered, duplicate-free list of candidate settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    items: Vec<TransformationParams>,
}

impl CandidateGrid {
    pub fn new(items: Vec<TransformationParams>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("candidate grid is empty".into()));
        }
        for item in &items {
            item.validate()?;
        }
        for (i, a) in items.iter().enumerate() {
            if items[..i].contains(a) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate candidate at position {i}: {a:?}"
                )));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[TransformationParams] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The standard neighborhood-fraction candidates:
    /// `log10(alpha) = -1.5, -1.35, ..., -0.15`.
    pub fn default_alphas() -> Vec<f64> {
        (1..=10)
            .rev()
            .map(|j| 10f64.powf(-0.15 * j as f64))
            .collect()
    }

    /// The standard component-count candidates.
    pub fn default_components() -> Vec<usize> {
        vec![1, 2, 3, 5, 8, 11, 15]
    }

    /// Regression localization: one candidate per alpha.
    pub fn regression_grid(alphas: &[f64]) -> Result<Self> {
        Self::new(
            alphas
                .iter()
                .map(|&alpha| TransformationParams {
                    alpha,
                    method: MethodParams::Regression,
                    initial_components: None,
                })
                .collect(),
        )
    }

    /// PLS localization: the product of alphas, local component counts and
    /// initial component counts.
    pub fn pls_grid(alphas: &[f64], local: &[usize], initial: &[usize]) -> Result<Self> {
        let mut items = Vec::with_capacity(alphas.len() * local.len() * initial.len());
        for &alpha in alphas {
            for &init in initial {
                for &k in local {
                    items.push(TransformationParams {
                        alpha,
                        method: MethodParams::Pls {
                            components: ComponentChoice::Fixed(k),
                        },
                        initial_components: Some(init),
                    });
                }
            }
        }
        Self::new(items)
    }

    /// Global PLS with the component count as the only free parameter
    /// (alpha fixed to 1, so "localization" covers the whole table).
    pub fn global_pls_grid(components: &[usize], initial: usize) -> Result<Self> {
        Self::new(
            components
                .iter()
                .map(|&k| TransformationParams {
                    alpha: 1.0,
                    method: MethodParams::Pls {
                        components: ComponentChoice::Fixed(k),
                    },
                    initial_components: Some(initial),
                })
                .collect(),
        )
    }
}

/// The conventional default neighborhood fraction for non-optimized
/// localization: 500 simulations out of `n`.
pub fn default_local_alpha(n: usize) -> f64 {
    (500.0 / n as f64).min(1.0)
}

/// Settings for the localization optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationConfig {
    /// Number of validation datasets drawn from the table.
    pub n_valid: usize,
    /// Posterior sample size used to score candidates.
    pub n_post: usize,
    /// Posterior sample size for final reported posteriors.
    pub n_final: usize,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            n_valid: 20,
            n_post: 200,
            n_final: 100,
        }
    }
}

/// Accepted simulations: row indices plus their parameter rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample {
    indices: IndexSet,
    params: Array2<f64>,
}

impl PosteriorSample {
    pub(crate) fn from_indices(table_params: ArrayView2<'_, f64>, indices: IndexSet) -> Self {
        let params = gather_rows(table_params, indices.as_slice());
        Self { indices, params }
    }

    pub fn indices(&self) -> &IndexSet {
        &self.indices
    }

    /// Accepted parameter rows, in acceptance (distance) order.
    pub fn params(&self) -> ArrayView2<'_, f64> {
        self.params.view()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Root mean squared error of a sample against a scalar truth.
pub fn rmse(samples: &[f64], truth: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("rmse of an empty sample".into()));
    }
    let sum: f64 = samples.iter().map(|s| (s - truth) * (s - truth)).sum();
    Ok((sum / samples.len() as f64).sqrt())
}

/// Summed RMSE: the sum over parameter components of the posterior-sample
/// RMSE against the true parameter vector.
pub fn srmse(sample: &PosteriorSample, truth: &[f64]) -> Result<f64> {
    let d = sample.params.ncols();
    if truth.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "truth has {} components, posterior has {d}",
            truth.len()
        )));
    }
    let mut total = 0.0;
    for j in 0..d {
        let col: Vec<f64> = sample.params.column(j).to_vec();
        total += rmse(&col, truth[j])?;
    }
    Ok(total)
}

pub(crate) fn srmse_of_columns(params: ArrayView2<'_, f64>, truth: &[f64]) -> f64 {
    let k = params.nrows() as f64;
    let mut total = 0.0;
    for (j, &t) in truth.iter().enumerate() {
        let sum: f64 = params.column(j).iter().map(|v| (v - t) * (v - t)).sum();
        total += (sum / k).sqrt();
    }
    total
}

/// Rejection ABC with quantile-style acceptance: keep the `n_accept`
/// simulations whose transformed summaries are nearest `s_obs_pre`.
///
/// `s_obs_pre` must already be preprocessed with the table's pipeline.
/// Rows listed in `exclude` are never accepted (used for leave-self-out
/// validation).
pub fn rejection_abc(
    prepared: &PreparedTable,
    transformation: &Transformation,
    s_obs_pre: &[f64],
    n_accept: usize,
    exclude: &[usize],
) -> Result<PosteriorSample> {
    let n = prepared.n_sims();
    let mut excluded = vec![false; n];
    for &i in exclude {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "excluded row {i} out of range for {n} simulations"
            )));
        }
        excluded[i] = true;
    }
    let eligible = n - exclude.len();
    if n_accept == 0 || n_accept > eligible {
        return Err(Error::InvalidArgument(format!(
            "cannot accept {n_accept} of {eligible} eligible simulations"
        )));
    }

    let scores = transformation.apply_matrix(prepared.summaries_pre())?;
    let obs = transformation.apply(s_obs_pre)?;
    let d2 = sq_dist_prefix(scores.view(), &obs, obs.len());
    let indices = select_k_nearest_where(&d2, n_accept, |i| !excluded[i])?;
    Ok(PosteriorSample::from_indices(
        prepared.table().params(),
        indices,
    ))
}

/// How a global transformation is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    Identity,
    Regression,
    Pls { components: ComponentChoice },
}

/// Fits a transformation on the whole table: identity, global regression
/// predictions, or global PLS scores (with CV component selection when
/// requested).
pub fn make_global_transformation(
    prepared: &PreparedTable,
    spec: &MethodSpec,
    cv: &CvConfig,
) -> Result<Transformation> {
    let pre = prepared.summaries_pre();
    let params = prepared.table().params();
    let t = match spec {
        MethodSpec::Identity => Transformation::identity(prepared.input_dim()),
        MethodSpec::Regression => fit_ols(pre, params)?,
        MethodSpec::Pls { components } => {
            let k = match components {
                ComponentChoice::Fixed(k) => *k,
                ComponentChoice::CrossValidated => select_pls_components(pre, params, cv)?,
            };
            fit_pls(pre, params, k)?
        }
    };
    Ok(t.with_preproc_id(prepared.preprocessor().fingerprint()))
}
