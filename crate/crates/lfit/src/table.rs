//! Simulation tables: the immutable substrate of every analysis.
//!
//! A [`SimulationTable`] pairs `N` parameter vectors (dimension `d`) with
//! `N` raw candidate-summary vectors (dimension `q`). Tables are validated
//! on construction and never mutated afterwards, so they can be shared
//! read-only across workers.

use crate::error::{Error, Result};
use crate::simulators::PriorSpec;
use ndarray::{Array2, ArrayView1, ArrayView2};

/// Provenance carried along with a table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableMeta {
    /// Model identifier (`ricker`, `gk`, `toy`, or anything for external tables).
    pub model: String,
    /// Prior the parameter rows were sampled from.
    pub prior: PriorSpec,
    /// Master seed used to generate the table.
    pub seed: u64,
    /// Names of the `d` parameter columns.
    pub param_names: Vec<String>,
    /// Names of the `q` summary columns.
    pub summary_names: Vec<String>,
}

impl TableMeta {
    pub fn new(
        model: impl Into<String>,
        prior: PriorSpec,
        seed: u64,
        param_names: Vec<String>,
        summary_names: Vec<String>,
    ) -> Self {
        Self {
            model: model.into(),
            prior,
            seed,
            param_names,
            summary_names,
        }
    }
}

/// `N` simulations: parameters, raw summaries and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTable {
    params: Array2<f64>,
    summaries: Array2<f64>,
    meta: TableMeta,
}

impl SimulationTable {
    /// Builds a table, checking shapes, finiteness and name lengths.
    pub fn new(params: Array2<f64>, summaries: Array2<f64>, meta: TableMeta) -> Result<Self> {
        let n = params.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "a simulation table needs at least one row".into(),
            ));
        }
        if summaries.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter rows but {} summary rows",
                n,
                summaries.nrows()
            )));
        }
        if let Some((r, c)) = first_non_finite(&params) {
            return Err(Error::InvalidArgument(format!(
                "non-finite parameter value at row {r}, column {c}"
            )));
        }
        if let Some((r, c)) = first_non_finite(&summaries) {
            return Err(Error::InvalidArgument(format!(
                "non-finite summary value at row {r}, column {c}"
            )));
        }
        if !meta.param_names.is_empty() && meta.param_names.len() != params.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter names for {} parameter columns",
                meta.param_names.len(),
                params.ncols()
            )));
        }
        if !meta.summary_names.is_empty() && meta.summary_names.len() != summaries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} summary names for {} summary columns",
                meta.summary_names.len(),
                summaries.ncols()
            )));
        }
        Ok(Self {
            params,
            summaries,
            meta,
        })
    }

    pub fn n_sims(&self) -> usize {
        self.params.nrows()
    }

    pub fn param_dim(&self) -> usize {
        self.params.ncols()
    }

    pub fn summary_dim(&self) -> usize {
        self.summaries.ncols()
    }

    pub fn params(&self) -> ArrayView2<'_, f64> {
        self.params.view()
    }

    pub fn summaries(&self) -> ArrayView2<'_, f64> {
        self.summaries.view()
    }

    pub fn param_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.params.row(i)
    }

    pub fn summary_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.summaries.row(i)
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }
}

fn first_non_finite(a: &Array2<f64>) -> Option<(usize, usize)> {
    for (r, row) in a.outer_iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Some((r, c));
            }
        }
    }
    None
}

/// An ordered set of row indices into a table.
///
/// Indices are unique and ordered ascending by the distance that produced
/// them, with ties broken by ascending index. The ordering is part of the
/// contract: enlarging a selection extends it as a prefix.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
}

impl IndexSet {
    /// Wraps indices that a selection routine produced; uniqueness and
    /// range hold by construction there, so no re-validation.
    pub(crate) fn from_selection(indices: Vec<usize>) -> Self {
        Self { indices }
    }

    /// Wraps an index list that is already in selection order.
    ///
    /// Uniqueness and the `< n` bound are checked; the distance ordering is
    /// the caller's responsibility.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "index {i} out of range for table of {n} rows"
                )));
            }
            if seen[i] {
                return Err(Error::InvalidArgument(format!("duplicate index {i}")));
            }
            seen[i] = true;
        }
        Ok(Self { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.contains(&idx)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Self {
        s.indices
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn meta() -> TableMeta {
        TableMeta::new(
            "test",
            PriorSpec::new(vec![(0.0, 1.0)]).unwrap(),
            0,
            vec![],
            vec![],
        )
    }

    #[test]
    fn rejects_row_count_mismatch() {
        let params = array![[0.5], [0.2]];
        let summaries = array![[1.0, 2.0]];
        assert!(matches!(
            SimulationTable::new(params, summaries, meta()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let empty = SimulationTable::new(Array2::zeros((0, 1)), Array2::zeros((0, 2)), meta());
        assert!(empty.is_err());

        let params = array![[f64::NAN]];
        let summaries = array![[1.0]];
        assert!(SimulationTable::new(params, summaries, meta()).is_err());
    }

    #[test]
    fn index_set_validates() {
        assert!(IndexSet::new(vec![0, 2, 1], 3).is_ok());
        assert!(IndexSet::new(vec![0, 0], 3).is_err());
        assert!(IndexSet::new(vec![3], 3).is_err());
    }
}
