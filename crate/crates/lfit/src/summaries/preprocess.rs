//! Summary preprocessing: square-root transform plus standardization.
//!
//! Candidate summaries live on wildly different scales, and the
//! nonnegative ones (counts, variances) have strongly skewed
//! distributions. The pipeline square-roots every column that is
//! nonnegative across the whole fitting table, then standardizes each
//! column to zero mean and unit variance. Columns with zero variance carry
//! no information and are dropped.

use crate::error::{Error, Result};
use crate::table::SimulationTable;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A fitted preprocessing pipeline. Fit exactly once, on one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    /// Whether column j gets the square-root transform (column was
    /// nonnegative across the fitting table).
    sqrt_mask: Vec<bool>,
    /// Post-sqrt column means, length q.
    means: Vec<f64>,
    /// Post-sqrt column sample standard deviations, length q.
    sds: Vec<f64>,
    /// Columns excluded downstream because their sd is zero.
    dropped: Vec<usize>,
    /// Complement of `dropped`, in ascending column order.
    retained: Vec<usize>,
}

/// Result of preprocessing one raw summary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    /// Transformed values for the retained columns.
    pub values: Vec<f64>,
    /// True when a masked column received a negative value (possible only
    /// for observed data outside the fitting table's support); the value
    /// was passed through un-rooted.
    pub out_of_support: bool,
}

impl Preprocessor {
    /// Fits the pipeline on a table.
    pub fn fit(table: &SimulationTable) -> Result<Self> {
        let s = table.summaries();
        let n = s.nrows();
        let q = s.ncols();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "preprocessing needs at least two simulations".into(),
            ));
        }

        let mut sqrt_mask = vec![true; q];
        for row in s.outer_iter() {
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 {
                    sqrt_mask[j] = false;
                }
            }
        }

        let transformed = |row: usize, col: usize| -> f64 {
            let v = s[(row, col)];
            if sqrt_mask[col] {
                v.sqrt()
            } else {
                v
            }
        };

        let mut means = vec![0.0; q];
        for i in 0..n {
            for (j, m) in means.iter_mut().enumerate() {
                *m += transformed(i, j);
            }
        }
        for m in &mut means {
            *m /= n as f64;
        }

        let mut sds = vec![0.0; q];
        for i in 0..n {
            for (j, acc) in sds.iter_mut().enumerate() {
                let d = transformed(i, j) - means[j];
                *acc += d * d;
            }
        }
        let mut dropped = Vec::new();
        let mut retained = Vec::new();
        for (j, acc) in sds.iter_mut().enumerate() {
            *acc = (*acc / (n - 1) as f64).sqrt();
            if *acc > 0.0 && acc.is_finite() {
                retained.push(j);
            } else {
                dropped.push(j);
            }
        }
        if retained.is_empty() {
            return Err(Error::UnusableTable(
                "every summary column has zero variance".into(),
            ));
        }
        Ok(Self {
            sqrt_mask,
            means,
            sds,
            dropped,
            retained,
        })
    }

    /// Raw summary dimension the pipeline was fitted on.
    pub fn input_dim(&self) -> usize {
        self.means.len()
    }

    /// Number of retained (transformed) columns.
    pub fn output_dim(&self) -> usize {
        self.retained.len()
    }

    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn sqrt_mask(&self) -> &[bool] {
        &self.sqrt_mask
    }

    /// Transforms one raw summary vector.
    pub fn apply(&self, s: &[f64]) -> Result<Preprocessed> {
        if s.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "summary vector of length {}, preprocessor fitted on {} columns",
                s.len(),
                self.input_dim()
            )));
        }
        let mut out_of_support = false;
        let mut values = Vec::with_capacity(self.retained.len());
        for &j in &self.retained {
            let raw = s[j];
            let v = if self.sqrt_mask[j] {
                if raw < 0.0 {
                    out_of_support = true;
                    raw
                } else {
                    raw.sqrt()
                }
            } else {
                raw
            };
            values.push((v - self.means[j]) / self.sds[j]);
        }
        Ok(Preprocessed {
            values,
            out_of_support,
        })
    }

    /// Transforms every row of the fitting table (or any table with the
    /// same raw dimension). Rows are independent, so the loop parallelizes
    /// without affecting the result.
    pub fn apply_matrix(&self, s: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if s.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns, preprocessor fitted on {}",
                s.ncols(),
                self.input_dim()
            )));
        }
        let s = s.as_standard_layout();
        let n = s.nrows();
        let q = s.ncols();
        let p = self.output_dim();
        let flat = s.as_slice().expect("standard layout");
        let mut out = vec![0.0; n * p];
        out.par_chunks_mut(p).enumerate().for_each(|(i, out_row)| {
            let row = &flat[i * q..(i + 1) * q];
            for (slot, &j) in out_row.iter_mut().zip(&self.retained) {
                let raw = row[j];
                let v = if self.sqrt_mask[j] && raw >= 0.0 {
                    raw.sqrt()
                } else {
                    raw
                };
                *slot = (v - self.means[j]) / self.sds[j];
            }
        });
        Ok(Array2::from_shape_vec((n, p), out).expect("shape matches construction"))
    }

    /// Stable identity of this fitted pipeline, for audit bundles.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut absorb = |bits: u64| {
            h ^= bits;
            h = h.wrapping_mul(0x1000_0000_01b3);
        };
        for &m in &self.sqrt_mask {
            absorb(m as u64);
        }
        for &v in self.means.iter().chain(&self.sds) {
            absorb(v.to_bits());
        }
        for &j in &self.dropped {
            absorb(j as u64);
        }
        h
    }
}
