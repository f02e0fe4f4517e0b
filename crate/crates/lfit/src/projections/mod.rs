//! Projection-based dimension reduction of summaries.
//!
//! A [`Transformation`] maps a preprocessed summary vector to a small
//! number of derived summaries: either the vector itself (identity), the
//! predictions of a linear regression of parameters on summaries, or the
//! score coordinates of a partial least squares fit. Inference only ever
//! compares transformed summaries by Euclidean distance, so a
//! transformation is exactly the object rejection ABC needs.

mod ols;
mod pls;

pub use ols::fit_ols;
pub use pls::{fit_pls, select_pls_components, CvConfig};

pub(crate) use ols::fit_ols_from_moments;
pub(crate) use pls::fit_pls_from_moments;

use crate::error::{Error, Result};
use crate::linalg::affine_map_rows;
use crate::table::IndexSet;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

/// What a transformation computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformKind {
    /// Passes the preprocessed summaries through unchanged.
    Identity,
    /// Regression predictions: `intercept + s * coef`, output dimension is
    /// the parameter dimension.
    Regression {
        intercept: Vec<f64>,
        /// `q x d` coefficient matrix.
        coef: Array2<f64>,
    },
    /// PLS score coordinates: `(s - center) * weights`, output dimension is
    /// the number of components.
    PlsScores {
        center: Vec<f64>,
        /// `q x k` weight matrix; leading columns are exactly the fits with
        /// fewer components.
        weights: Array2<f64>,
    },
}

/// A fitted summary transformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformation {
    kind: TransformKind,
    input_dim: usize,
    /// Rows (of the fitting table) the transformation was fitted on, in
    /// ascending-distance order; `None` for global fits on all rows.
    fit_rows: Option<IndexSet>,
    /// Fingerprint of the preprocessor whose output this transformation
    /// expects, when known.
    preproc_id: Option<u64>,
}

impl Transformation {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: TransformKind::Identity,
            input_dim: dim,
            fit_rows: None,
            preproc_id: None,
        }
    }

    pub(crate) fn new(kind: TransformKind, input_dim: usize) -> Self {
        Self {
            kind,
            input_dim,
            fit_rows: None,
            preproc_id: None,
        }
    }

    pub fn with_fit_rows(mut self, rows: IndexSet) -> Self {
        self.fit_rows = Some(rows);
        self
    }

    pub fn with_preproc_id(mut self, id: u64) -> Self {
        self.preproc_id = Some(id);
        self
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        match &self.kind {
            TransformKind::Identity => self.input_dim,
            TransformKind::Regression { intercept, .. } => intercept.len(),
            TransformKind::PlsScores { weights, .. } => weights.ncols(),
        }
    }

    /// Component count for PLS transformations.
    pub fn n_components(&self) -> Option<usize> {
        match &self.kind {
            TransformKind::PlsScores { weights, .. } => Some(weights.ncols()),
            _ => None,
        }
    }

    pub fn fit_rows(&self) -> Option<&IndexSet> {
        self.fit_rows.as_ref()
    }

    pub fn preproc_id(&self) -> Option<u64> {
        self.preproc_id
    }

    /// Transforms one preprocessed summary vector.
    pub fn apply(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "summary vector of length {}, transformation expects {}",
                s.len(),
                self.input_dim
            )));
        }
        let view = ArrayView2::from_shape((1, s.len()), s)
            .expect("slice reshapes to a single row");
        Ok(self.apply_matrix_unchecked(view).into_raw_vec())
    }

    /// Transforms every row of a preprocessed summary matrix.
    pub fn apply_matrix(&self, s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if s.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns, transformation expects {}",
                s.ncols(),
                self.input_dim
            )));
        }
        Ok(self.apply_matrix_unchecked(s))
    }

    fn apply_matrix_unchecked(&self, s: ArrayView2<'_, f64>) -> Array2<f64> {
        match &self.kind {
            TransformKind::Identity => s.to_owned(),
            TransformKind::Regression { intercept, coef } => {
                affine_map_rows(s, None, Some(intercept), coef.t())
            }
            TransformKind::PlsScores { center, weights } => {
                affine_map_rows(s, Some(center), None, weights.t())
            }
        }
    }

    /// Like [`Transformation::apply_matrix`] but writing into a
    /// caller-owned buffer of length `s.nrows() * output_dim()`; computes
    /// the same values element for element.
    pub(crate) fn apply_matrix_into(&self, s: ArrayView2<'_, f64>, out: &mut [f64]) {
        debug_assert_eq!(s.ncols(), self.input_dim);
        match &self.kind {
            TransformKind::Identity => {
                let s = s.as_standard_layout();
                out.copy_from_slice(s.as_slice().expect("standard layout"));
            }
            TransformKind::Regression { intercept, coef } => {
                crate::linalg::affine_map_rows_into(s, None, Some(intercept), coef.t(), out)
            }
            TransformKind::PlsScores { center, weights } => {
                crate::linalg::affine_map_rows_into(s, Some(center), None, weights.t(), out)
            }
        }
    }

    /// A PLS transformation restricted to its first `k` components.
    ///
    /// SIMPLS builds components sequentially, so this equals a fresh fit
    /// with `k` components, bit for bit.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        match &self.kind {
            TransformKind::PlsScores { center, weights } => {
                if k == 0 || k > weights.ncols() {
                    return Err(Error::InvalidArgument(format!(
                        "cannot truncate a {}-component transformation to {k}",
                        weights.ncols()
                    )));
                }
                Ok(Self {
                    kind: TransformKind::PlsScores {
                        center: center.clone(),
                        weights: weights.slice(ndarray::s![.., ..k]).to_owned(),
                    },
                    input_dim: self.input_dim,
                    fit_rows: self.fit_rows.clone(),
                    preproc_id: self.preproc_id,
                })
            }
            _ => Err(Error::InvalidArgument(
                "only PLS transformations have components to truncate".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_passes_through() {
        let t = Transformation::identity(3);
        assert_eq!(t.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(t.output_dim(), 3);
        assert!(t.apply(&[1.0]).is_err());
    }

    #[test]
    fn regression_applies_affine_map() {
        let t = Transformation::new(
            TransformKind::Regression {
                intercept: vec![1.0],
                coef: array![[2.0], [0.5]],
            },
            2,
        );
        assert_eq!(t.apply(&[1.0, 2.0]).unwrap(), vec![4.0]);
        assert_eq!(t.output_dim(), 1);
    }

    #[test]
    fn pls_scores_subtract_the_center() {
        let t = Transformation::new(
            TransformKind::PlsScores {
                center: vec![1.0, 1.0],
                weights: array![[1.0, 0.0], [0.0, 1.0]],
            },
            2,
        );
        assert_eq!(t.apply(&[2.0, 3.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(t.n_components(), Some(2));
        let t1 = t.truncated(1).unwrap();
        assert_eq!(t1.apply(&[2.0, 3.0]).unwrap(), vec![1.0]);
        assert!(t.truncated(0).is_err());
        assert!(t.truncated(3).is_err());
    }

    #[test]
    fn serializes_round_trip() {
        let t = Transformation::new(
            TransformKind::Regression {
                intercept: vec![1.0],
                coef: array![[2.0], [0.5]],
            },
            2,
        );
        let json = serde_json::to_string(&t).unwrap();
        let back: Transformation = serde_json::from_str(&json).unwrap();
        assert_eq!(t, back);
    }
}
