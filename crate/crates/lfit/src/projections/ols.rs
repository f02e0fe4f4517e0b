//! Ordinary least squares with a minimum-norm fallback.

use crate::error::{Error, Result};
use crate::linalg::{pinv_solve, CenteredMoments, Moments};
use crate::projections::{TransformKind, Transformation};
use ndarray::ArrayView2;

/// Relative eigenvalue cutoff for rank detection.
const RCOND: f64 = 1e-12;

/// Fits `theta ~ intercept + s * coef` by least squares.
///
/// The solve goes through the centered normal equations with an
/// eigenvalue-based pseudoinverse, so rank-deficient designs (duplicated
/// or collinear summary columns) get the minimum-norm coefficient vector
/// and training predictions remain the orthogonal projection.
pub fn fit_ols(s: ArrayView2<'_, f64>, theta: ArrayView2<'_, f64>) -> Result<Transformation> {
    let n = s.nrows();
    if theta.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} summary rows but {} parameter rows",
            n,
            theta.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "least squares needs at least 2 rows, got {n}"
        )));
    }
    let moments = Moments::from_rows(s, theta, 0..n).centered();
    Ok(fit_ols_from_moments(&moments))
}

/// The same fit from precomputed centered moments.
pub(crate) fn fit_ols_from_moments(m: &CenteredMoments) -> Transformation {
    let coef = pinv_solve(&m.gram, &m.cross, RCOND);
    let d = m.y_mean.len();
    let q = m.x_mean.len();
    let mut intercept = Vec::with_capacity(d);
    for j in 0..d {
        let mut shift = 0.0;
        for l in 0..q {
            shift += m.x_mean[l] * coef[(l, j)];
        }
        intercept.push(m.y_mean[j] - shift);
    }
    Transformation::new(TransformKind::Regression { intercept, coef }, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use ndarray::{array, Array2};
    use rand::Rng;

    #[test]
    fn recovers_exact_linear_data() {
        // theta = 1 + 2 s, noise-free.
        let s = array![[0.0], [1.0], [2.0], [3.0]];
        let theta = array![[1.0], [3.0], [5.0], [7.0]];
        let t = fit_ols(s.view(), theta.view()).unwrap();
        let pred = t.apply_matrix(s.view()).unwrap();
        for i in 0..4 {
            assert!((pred[(i, 0)] - theta[(i, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_target_gives_zero_weights() {
        let s = array![[0.0], [1.0], [2.0]];
        let theta = array![[4.0], [4.0], [4.0]];
        let t = fit_ols(s.view(), theta.view()).unwrap();
        match t.kind() {
            TransformKind::Regression { intercept, coef } => {
                assert_eq!(intercept[0], 4.0);
                assert!(coef[(0, 0)].abs() < 1e-12);
            }
            _ => panic!("expected a regression"),
        }
    }

    /// Pseudoinverse oracle on a small instance: predictions from the
    /// SVD-based pseudoinverse of the augmented design `[1 | S]`.
    fn pinv_oracle_predictions(s: &Array2<f64>, theta: &Array2<f64>) -> Array2<f64> {
        let n = s.nrows();
        let q = s.ncols();
        let design = nalgebra::DMatrix::from_fn(n, q + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                s[(r, c - 1)]
            }
        });
        let y = nalgebra::DMatrix::from_fn(n, theta.ncols(), |r, c| theta[(r, c)]);
        let pinv = design
            .clone()
            .svd(true, true)
            .pseudo_inverse(1e-12)
            .unwrap();
        let beta = pinv * y;
        let pred = design * beta;
        Array2::from_shape_fn((n, theta.ncols()), |(r, c)| pred[(r, c)])
    }

    #[test]
    fn duplicated_column_design_still_reproduces_targets() {
        // 5x3 design whose third column duplicates the first.
        let mut rng = stream_rng(17, 5, 0);
        let mut s = Array2::zeros((5, 3));
        for i in 0..5 {
            let a: f64 = rng.gen_range(-2.0..2.0);
            let b: f64 = rng.gen_range(-2.0..2.0);
            s[(i, 0)] = a;
            s[(i, 1)] = b;
            s[(i, 2)] = a;
        }
        let theta =
            Array2::from_shape_fn((5, 1), |(i, _)| 0.5 + 1.5 * s[(i, 0)] - 0.7 * s[(i, 1)]);

        let t = fit_ols(s.view(), theta.view()).unwrap();
        let pred = t.apply_matrix(s.view()).unwrap();
        let oracle = pinv_oracle_predictions(&s, &theta);
        for i in 0..5 {
            assert!(
                (pred[(i, 0)] - oracle[(i, 0)]).abs() < 1e-8,
                "row {i}: {} vs oracle {}",
                pred[(i, 0)],
                oracle[(i, 0)]
            );
            assert!((pred[(i, 0)] - theta[(i, 0)]).abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let mut rng = stream_rng(17, 6, 0);
        for trial in 0..20 {
            let n = 30 + trial;
            let q = 4;
            let s = Array2::from_shape_fn((n, q), |_| rng.gen_range(-3.0..3.0));
            let theta = Array2::from_shape_fn((n, 2), |(i, j)| {
                s[(i, 0)] * (j as f64 + 0.5) - s[(i, 2)] + rng.gen_range(-0.5..0.5)
            });
            let t = fit_ols(s.view(), theta.view()).unwrap();
            let pred = t.apply_matrix(s.view()).unwrap();
            let resid = &theta - &pred;
            for target in 0..2 {
                let col = resid.column(target);
                let mean: f64 = col.sum();
                assert!(mean.abs() < 1e-8 * n as f64, "intercept residual {mean}");
                for j in 0..q {
                    let dot: f64 = col
                        .iter()
                        .zip(s.column(j).iter())
                        .map(|(r, x)| r * x)
                        .sum();
                    assert!(dot.abs() < 1e-8 * n as f64, "column {j} residual dot {dot}");
                }
            }
        }
    }

    #[test]
    fn rejects_tiny_or_mismatched_input() {
        let s = array![[1.0]];
        let theta = array![[1.0]];
        assert!(fit_ols(s.view(), theta.view()).is_err());
        let s = array![[1.0], [2.0]];
        let theta = array![[1.0]];
        assert!(fit_ols(s.view(), theta.view()).is_err());
    }
}
