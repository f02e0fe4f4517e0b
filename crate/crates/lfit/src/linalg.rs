//! Internal numeric kernels.
//!
//! Two properties matter here beyond speed:
//!
//! 1. **Order-stability.** Moment accumulation is strictly row-sequential,
//!    so any two code paths that feed the same rows in the same order get
//!    bit-identical sufficient statistics. The optimizer exploits this: it
//!    accumulates moments once along a distance-sorted row order and
//!    snapshots them at each neighborhood cutoff, which equals refitting
//!    from scratch on each neighborhood.
//! 2. **Element independence.** Score/prediction matrices are computed one
//!    output element at a time (a dot product over the input dimension), so
//!    truncating a weight matrix to fewer columns yields exactly the same
//!    leading columns. Rows parallelize without changing results.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

/// Running raw moments of paired (x, y) rows: Gram, cross-product and sums.
/// Only the upper triangle of the Gram is maintained.
#[derive(Clone)]
pub(crate) struct Moments {
    pub n: usize,
    q: usize,
    d: usize,
    gram: Vec<f64>,
    cross: Vec<f64>,
    x_sum: Vec<f64>,
    y_sum: Vec<f64>,
}

impl Moments {
    pub fn new(q: usize, d: usize) -> Self {
        Self {
            n: 0,
            q,
            d,
            gram: vec![0.0; q * q],
            cross: vec![0.0; q * d],
            x_sum: vec![0.0; q],
            y_sum: vec![0.0; d],
        }
    }

    #[inline]
    pub fn add_row(&mut self, x: &[f64], y: &[f64]) {
        debug_assert_eq!(x.len(), self.q);
        debug_assert_eq!(y.len(), self.d);
        for j in 0..self.q {
            let xj = x[j];
            // Upper triangle only; the tail slices keep the loop stride-1.
            let row = &mut self.gram[j * self.q + j..(j + 1) * self.q];
            let tail = &x[j..];
            for (g, &xl) in row.iter_mut().zip(tail) {
                *g += xj * xl;
            }
        }
        for (j, &xj) in x.iter().enumerate() {
            let row = &mut self.cross[j * self.d..(j + 1) * self.d];
            for (c, &ym) in row.iter_mut().zip(y) {
                *c += xj * ym;
            }
        }
        for (s, &v) in self.x_sum.iter_mut().zip(x) {
            *s += v;
        }
        for (s, &v) in self.y_sum.iter_mut().zip(y) {
            *s += v;
        }
        self.n += 1;
    }

    /// Accumulates the given rows of `(x, y)` in the order provided.
    pub fn from_rows<I>(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, rows: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        let mut m = Self::new(x.ncols(), y.ncols());
        let mut xbuf = vec![0.0; x.ncols()];
        let mut ybuf = vec![0.0; y.ncols()];
        for i in rows {
            copy_row(x, i, &mut xbuf);
            copy_row(y, i, &mut ybuf);
            m.add_row(&xbuf, &ybuf);
        }
        m
    }

    /// Centered second moments and the means.
    pub fn centered(&self) -> CenteredMoments {
        let n = self.n as f64;
        let q = self.q;
        let d = self.d;
        let x_mean: Vec<f64> = self.x_sum.iter().map(|v| v / n).collect();
        let y_mean: Vec<f64> = self.y_sum.iter().map(|v| v / n).collect();
        let mut gram = Array2::zeros((q, q));
        for j in 0..q {
            for l in j..q {
                let v = self.gram[j * q + l] - n * x_mean[j] * x_mean[l];
                gram[(j, l)] = v;
                gram[(l, j)] = v;
            }
        }
        let mut cross = Array2::zeros((q, d));
        for j in 0..q {
            for m in 0..d {
                cross[(j, m)] = self.cross[j * d + m] - n * x_mean[j] * y_mean[m];
            }
        }
        CenteredMoments {
            gram,
            cross,
            x_mean,
            y_mean,
        }
    }
}

/// Centered sufficient statistics of a fit: `gram = X0' X0`,
/// `cross = X0' Y0` with `X0`, `Y0` column-centered.
pub(crate) struct CenteredMoments {
    pub gram: Array2<f64>,
    pub cross: Array2<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

#[inline]
pub(crate) fn copy_row(a: ArrayView2<'_, f64>, i: usize, buf: &mut [f64]) {
    let row = a.row(i);
    if let Some(s) = row.as_slice() {
        buf.copy_from_slice(s);
    } else {
        for (b, v) in buf.iter_mut().zip(row.iter()) {
            *b = *v;
        }
    }
}

/// Gathers the given rows into a dense matrix, in the order provided.
pub(crate) fn gather_rows(a: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), a.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&a.row(src));
    }
    out
}

/// Eigendecomposition of a symmetric matrix; returns (eigenvalues,
/// eigenvectors-as-columns) sorted by descending eigenvalue.
pub(crate) fn sym_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let q = a.nrows();
    let m = nalgebra::DMatrix::from_fn(q, q, |r, c| a[(r, c)]);
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = Array2::zeros((q, q));
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..q {
            vectors[(r, dst)] = eig.eigenvectors[(r, src)];
        }
    }
    (values, vectors)
}

/// Minimum-norm solution of `gram * beta = cross` for a symmetric PSD
/// `gram`, via its eigendecomposition with a relative cutoff: eigenvalues
/// below `rcond * max_eigenvalue` are treated as zero.
pub(crate) fn pinv_solve(gram: &Array2<f64>, cross: &Array2<f64>, rcond: f64) -> Array2<f64> {
    let (values, vectors) = sym_eigen(gram);
    let lambda_max = values.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = lambda_max * rcond;
    // W = V' * cross, scaled by the pseudo-inverted eigenvalues.
    let mut w = vectors.t().dot(cross);
    for (idx, &lambda) in values.iter().enumerate() {
        let scale = if lambda > cutoff { 1.0 / lambda } else { 0.0 };
        w.row_mut(idx).mapv_inplace(|v| v * scale);
    }
    vectors.dot(&w)
}

/// Dominant eigenvector of a small symmetric PSD matrix, sign-canonicalized
/// so its largest-magnitude entry is positive.
pub(crate) fn dominant_eigenvector(a: &Array2<f64>) -> Vec<f64> {
    let (_, vectors) = sym_eigen(a);
    let mut v: Vec<f64> = vectors.column(0).to_vec();
    let mut lead = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    v
}

/// Per-element affine map: `out[i, j] = offset[j] + dot(x[i] - center, w_t[j])`.
///
/// `w_t` holds one output dimension per row (transposed weights), so each
/// dot runs over two contiguous slices. Rows are independent.
pub(crate) fn affine_map_rows(
    x: ArrayView2<'_, f64>,
    center: Option<&[f64]>,
    offset: Option<&[f64]>,
    w_t: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let n = x.nrows();
    let p = w_t.nrows();
    let mut out = vec![0.0; n * p];
    affine_map_rows_into(x, center, offset, w_t, &mut out);
    Array2::from_shape_vec((n, p), out).expect("shape matches construction")
}

/// [`affine_map_rows`] writing into a caller-owned buffer of length
/// `n * p` (row-major), so hot loops can reuse one allocation.
pub(crate) fn affine_map_rows_into(
    x: ArrayView2<'_, f64>,
    center: Option<&[f64]>,
    offset: Option<&[f64]>,
    w_t: ArrayView2<'_, f64>,
    out: &mut [f64],
) {
    let x = x.as_standard_layout();
    let w_t = w_t.as_standard_layout();

    let q = x.ncols();
    let p = w_t.nrows();
    debug_assert_eq!(w_t.ncols(), q);
    debug_assert_eq!(out.len(), x.nrows() * p);
    let w_flat = w_t.as_slice().expect("standard layout");
    out.par_chunks_mut(p).enumerate().for_each(|(i, out_row)| {
        let row = x.row(i);
        let row = row.as_slice().expect("contiguous by construction");
        // Four output dimensions per pass over the row: each accumulator
        // still sums its own products in ascending order, so every element
        // equals the single-dot result bit for bit.
        let mut j = 0;
        while j + 4 <= p {
            let w0 = &w_flat[j * q..(j + 1) * q];
            let w1 = &w_flat[(j + 1) * q..(j + 2) * q];
            let w2 = &w_flat[(j + 2) * q..(j + 3) * q];
            let w3 = &w_flat[(j + 3) * q..(j + 4) * q];
            let (mut a0, mut a1, mut a2, mut a3) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            match center {
                Some(c) => {
                    for l in 0..q {
                        let xv = row[l] - c[l];
                        a0 += xv * w0[l];
                        a1 += xv * w1[l];
                        a2 += xv * w2[l];
                        a3 += xv * w3[l];
                    }
                }
                None => {
                    for l in 0..q {
                        let xv = row[l];
                        a0 += xv * w0[l];
                        a1 += xv * w1[l];
                        a2 += xv * w2[l];
                        a3 += xv * w3[l];
                    }
                }
            }
            if let Some(o) = offset {
                a0 += o[j];
                a1 += o[j + 1];
                a2 += o[j + 2];
                a3 += o[j + 3];
            }
            out_row[j] = a0;
            out_row[j + 1] = a1;
            out_row[j + 2] = a2;
            out_row[j + 3] = a3;
            j += 4;
        }
        while j < p {
            let w = &w_flat[j * q..(j + 1) * q];
            let mut acc = 0.0;
            match center {
                Some(c) => {
                    for l in 0..q {
                        acc += (row[l] - c[l]) * w[l];
                    }
                }
                None => {
                    for l in 0..q {
                        acc += row[l] * w[l];
                    }
                }
            }
            out_row[j] = match offset {
                Some(o) => o[j] + acc,
                None => acc,
            };
            j += 1;
        }
    });
}

/// Squared Euclidean distance between the first `dims` columns of each row
/// and `obs[..dims]`, accumulated in ascending dimension order.
pub(crate) fn sq_dist_prefix(scores: ArrayView2<'_, f64>, obs: &[f64], dims: usize) -> Vec<f64> {
    let scores = scores.as_standard_layout();
    let mut out = vec![0.0; scores.nrows()];
    let flat = scores.as_slice().expect("standard layout");
    sq_dist_prefix_into(flat, scores.ncols(), obs, dims, &mut out);
    out
}

/// [`sq_dist_prefix`] over a flat row-major buffer with `stride` columns,
/// writing into a caller-owned output of length `n`.
pub(crate) fn sq_dist_prefix_into(
    scores: &[f64],
    stride: usize,
    obs: &[f64],
    dims: usize,
    out: &mut [f64],
) {
    debug_assert!(dims <= stride);
    debug_assert!(dims <= obs.len());
    debug_assert_eq!(scores.len(), out.len() * stride);
    out.par_iter_mut().enumerate().for_each(|(i, d2)| {
        let row = &scores[i * stride..i * stride + dims];
        let mut acc = 0.0;
        for l in 0..dims {
            let d = row[l] - obs[l];
            acc += d * d;
        }
        *d2 = acc;
    });
}
