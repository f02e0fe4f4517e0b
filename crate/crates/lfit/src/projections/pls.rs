//! Partial least squares via SIMPLS, plus cross-validated component
//! selection.
//!
//! The fit works on sufficient statistics (centered Gram and
//! cross-product), never on per-row score vectors, so fitting cost is one
//! pass over the rows regardless of the component count. Components are
//! extracted sequentially and component `a` never looks at later ones —
//! the weight matrix of a large fit therefore *contains* every smaller
//! fit, which both the optimizer and [`Transformation::truncated`] rely
//! on.
//!
//! [`Transformation::truncated`]: crate::projections::Transformation::truncated

use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenvector, CenteredMoments, Moments};
use crate::projections::{TransformKind, Transformation};
use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Components whose score variance falls below this fraction of the first
/// component's are considered exhausted and zero-filled.
const DEGENERACY_RATIO: f64 = 1e-24;

/// Cross-validation settings for component selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    /// Hard cap on the number of components.
    pub max_components: usize,
    /// Number of folds.
    pub folds: usize,
    /// Stop once the next component improves CV-MSE by less than this
    /// fraction of the total parameter variance.
    pub threshold_frac: f64,
    /// Seed for the fold shuffle.
    pub fold_seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            max_components: 15,
            folds: 10,
            threshold_frac: 0.01,
            fold_seed: 0,
        }
    }
}

pub(crate) struct PlsFit {
    /// `q x k` score weights, columns normalized so training scores have
    /// unit Euclidean norm.
    pub weights: Array2<f64>,
    /// `d x k` regression loadings of the centered targets on the scores.
    pub y_loadings: Array2<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

/// SIMPLS on centered moments.
pub(crate) fn simpls(m: &CenteredMoments, n_components: usize) -> PlsFit {
    let q = m.x_mean.len();
    let d = m.y_mean.len();
    let mut weights = Array2::zeros((q, n_components));
    let mut y_loadings = Array2::zeros((d, n_components));

    let mut cross = m.cross.clone();
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(n_components);
    let mut first_score_var: Option<f64> = None;

    for a in 0..n_components {
        // Direction maximizing covariance with the (deflated) targets:
        // dominant right singular vector of `cross`, lifted back to x-space.
        let m_small = cross.t().dot(&cross);
        let v = Array1::from(dominant_eigenvector(&m_small));
        let r = cross.dot(&v);
        let gr = m.gram.dot(&r);
        let score_var = r.dot(&gr);
        let floor = first_score_var.map_or(0.0, |f| f * DEGENERACY_RATIO);
        if !score_var.is_finite() || score_var <= floor {
            break; // remaining components stay zero
        }
        if first_score_var.is_none() {
            first_score_var = Some(score_var);
        }
        let score_norm = score_var.sqrt();

        let w = r.mapv(|x| x / score_norm);
        let q_a = cross.t().dot(&w);
        // Orthonormalize the x-loading against previous ones; doing the
        // projection twice keeps the basis orthogonal to working precision.
        let mut loading = gr.mapv(|x| x / score_norm);
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&loading);
                loading.zip_mut_with(b, |l, &bv| *l -= proj * bv);
            }
        }
        let loading_norm = loading.dot(&loading).sqrt();
        if !(loading_norm > 0.0) || !loading_norm.is_finite() {
            break;
        }
        let loading = loading.mapv(|x| x / loading_norm);
        let projected = loading.t().dot(&cross);
        for j in 0..q {
            for c in 0..d {
                cross[(j, c)] -= loading[j] * projected[c];
            }
        }

        weights.column_mut(a).assign(&w);
        y_loadings.column_mut(a).assign(&q_a);
        basis.push(loading);
    }

    PlsFit {
        weights,
        y_loadings,
        x_mean: m.x_mean.clone(),
        y_mean: m.y_mean.clone(),
    }
}

fn check_components(n_components: usize, n: usize, q: usize) -> Result<()> {
    let cap = (n.saturating_sub(1)).min(q);
    if n_components == 0 || n_components > cap {
        return Err(Error::InvalidArgument(format!(
            "n_components = {n_components} out of range [1, {cap}] for {n} rows and {q} columns"
        )));
    }
    Ok(())
}

/// Fits SIMPLS score weights from summaries to parameters.
///
/// The returned transformation maps a preprocessed summary vector to its
/// `n_components` score coordinates, `(s - center) * weights`. Training
/// scores of successive components are mutually orthogonal.
pub fn fit_pls(
    s: ArrayView2<'_, f64>,
    theta: ArrayView2<'_, f64>,
    n_components: usize,
) -> Result<Transformation> {
    let n = s.nrows();
    if theta.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} summary rows but {} parameter rows",
            n,
            theta.nrows()
        )));
    }
    check_components(n_components, n, s.ncols())?;
    let moments = Moments::from_rows(s, theta, 0..n).centered();
    Ok(fit_pls_from_moments(&moments, n_components))
}

/// The same fit from precomputed centered moments.
pub(crate) fn fit_pls_from_moments(m: &CenteredMoments, n_components: usize) -> Transformation {
    let fit = simpls(m, n_components);
    Transformation::new(
        TransformKind::PlsScores {
            center: fit.x_mean,
            weights: fit.weights,
        },
        m.x_mean.len(),
    )
}

/// Picks the number of PLS components by k-fold cross-validation.
///
/// Returns the smallest `c >= 1` such that component `c + 1` improves the
/// CV mean squared error (summed over parameter components) by less than
/// `threshold_frac` times the total parameter variance, capped at
/// `max_components`. Degenerate targets (all columns constant) select 1.
pub fn select_pls_components(
    s: ArrayView2<'_, f64>,
    theta: ArrayView2<'_, f64>,
    cv: &CvConfig,
) -> Result<usize> {
    let n = s.nrows();
    let q = s.ncols();
    let d = theta.ncols();
    if theta.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} summary rows but {} parameter rows",
            n,
            theta.nrows()
        )));
    }
    if cv.folds < 2 || n < cv.folds {
        return Err(Error::InvalidArgument(format!(
            "need n >= folds >= 2, got n = {n}, folds = {}",
            cv.folds
        )));
    }

    let total_var: f64 = (0..d)
        .map(|j| {
            let col = theta.column(j);
            let mean = col.sum() / n as f64;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        })
        .sum();
    if total_var <= 0.0 {
        return Ok(1);
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cv.fold_seed);
    perm.shuffle(&mut rng);
    let bounds: Vec<usize> = (0..=cv.folds).map(|f| f * n / cv.folds).collect();
    let max_fold = (1..=cv.folds)
        .map(|f| bounds[f] - bounds[f - 1])
        .max()
        .unwrap();
    let cap = cv.max_components.min(q).min(n - max_fold - 1);
    if cap == 0 {
        return Err(Error::InvalidArgument(
            "training folds too small to fit any component".into(),
        ));
    }

    // One SIMPLS fit per fold at the cap; every smaller component count is
    // a truncation, so each fold contributes errors for all counts at once.
    let fold_sse: Vec<Vec<f64>> = (0..cv.folds)
        .into_par_iter()
        .map(|f| {
            let held_out = &perm[bounds[f]..bounds[f + 1]];
            let mut in_fold = vec![false; n];
            for &i in held_out {
                in_fold[i] = true;
            }
            let train_rows = (0..n).filter(|i| !in_fold[*i]);
            let moments = Moments::from_rows(s, theta, train_rows).centered();
            let fit = simpls(&moments, cap);

            let mut sse = vec![0.0; cap];
            let mut scores = vec![0.0; cap];
            for &i in held_out {
                let x = s.row(i);
                for (a, sc) in scores.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for l in 0..q {
                        acc += (x[l] - fit.x_mean[l]) * fit.weights[(l, a)];
                    }
                    *sc = acc;
                }
                for m in 0..d {
                    let mut pred = fit.y_mean[m];
                    for (a, sc) in scores.iter().enumerate() {
                        pred += sc * fit.y_loadings[(m, a)];
                        let err = theta[(i, m)] - pred;
                        sse[a] += err * err;
                    }
                }
            }
            sse
        })
        .collect();

    let mut mse = vec![0.0; cap];
    for sse in &fold_sse {
        for (m, v) in mse.iter_mut().zip(sse) {
            *m += v;
        }
    }
    for m in &mut mse {
        *m /= n as f64;
    }

    let threshold = cv.threshold_frac * total_var;
    let mut c = 1;
    while c < cap && mse[c - 1] - mse[c] >= threshold {
        c += 1;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projections::fit_ols;
    use crate::rng::stream_rng;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64, scale: f64) -> Array2<f64> {
        let mut rng = stream_rng(23, 40, seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
    }

    #[test]
    fn single_predictor_scores_are_an_affine_rescaling() {
        let s = array![[1.0], [2.0], [4.0], [7.0], [11.0]];
        let theta = array![[0.5], [1.0], [2.5], [3.0], [6.0]];
        let t = fit_pls(s.view(), theta.view(), 1).unwrap();
        let scores = t.apply_matrix(s.view()).unwrap();
        // Correlation with the raw predictor must be exactly +-1.
        let s_mean = s.column(0).sum() / 5.0;
        let t_mean = scores.column(0).sum() / 5.0;
        let mut num = 0.0;
        let mut den_s = 0.0;
        let mut den_t = 0.0;
        for i in 0..5 {
            let ds = s[(i, 0)] - s_mean;
            let dt = scores[(i, 0)] - t_mean;
            num += ds * dt;
            den_s += ds * ds;
            den_t += dt * dt;
        }
        let corr = num / (den_s.sqrt() * den_t.sqrt());
        assert!((corr.abs() - 1.0).abs() < 1e-12, "corr = {corr}");
    }

    #[test]
    fn rank_one_latent_data_is_captured_by_one_component() {
        // S = u v' + tiny noise; the first component must explain almost
        // all summary variance, matching the SVD oracle.
        let n = 50;
        let q = 10;
        let mut rng = stream_rng(23, 41, 0);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = Array2::from_shape_fn((n, q), |(i, j)| {
            u[i] * v[j] + 1e-6 * rng.gen_range(-1.0..1.0)
        });
        let theta = Array2::from_shape_fn((n, 1), |(i, _)| u[i]);

        let t = fit_pls(s.view(), theta.view(), 3).unwrap();
        let scores = t.apply_matrix(s.view()).unwrap();

        // Fraction of centered summary variance carried by component 1.
        let mut centered = s.clone();
        for j in 0..q {
            let mean = centered.column(j).sum() / n as f64;
            centered.column_mut(j).mapv_inplace(|x| x - mean);
        }
        let total: f64 = centered.iter().map(|x| x * x).sum();
        let t1 = scores.column(0);
        // Projection loadings of the centered data on the unit-norm score.
        let t1_norm2: f64 = t1.iter().map(|x| x * x).sum();
        let mut explained = 0.0;
        for j in 0..q {
            let dot: f64 = centered
                .column(j)
                .iter()
                .zip(t1.iter())
                .map(|(x, t)| x * t)
                .sum();
            explained += dot * dot / t1_norm2;
        }
        let frac = explained / total;
        assert!(frac > 0.99, "explained fraction {frac}");

        // SVD oracle on the centered matrix.
        let m = nalgebra::DMatrix::from_fn(n, q, |r, c| centered[(r, c)]);
        let sv = m.svd(false, false).singular_values;
        let oracle = sv[0] * sv[0] / sv.iter().map(|x| x * x).sum::<f64>();
        assert!((frac - oracle).abs() < 0.005, "{frac} vs oracle {oracle}");
    }

    #[test]
    fn full_components_span_the_ols_fit() {
        let n = 40;
        let q = 5;
        let s = random_matrix(n, q, 1, 2.0);
        let mut rng = stream_rng(23, 42, 0);
        let theta = Array2::from_shape_fn((n, 2), |(i, j)| {
            s[(i, 0)] - 0.3 * s[(i, 3)] + (j as f64) * s[(i, 1)] + rng.gen_range(-0.2..0.2)
        });

        let pls = fit_pls(s.view(), theta.view(), q).unwrap();
        let scores = pls.apply_matrix(s.view()).unwrap();
        let on_scores = fit_ols(scores.view(), theta.view()).unwrap();
        let pls_pred = on_scores
            .apply_matrix(scores.view())
            .unwrap();
        let ols_pred = fit_ols(s.view(), theta.view())
            .unwrap()
            .apply_matrix(s.view())
            .unwrap();
        for (a, b) in pls_pred.iter().zip(ols_pred.iter()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn training_scores_are_mutually_orthogonal() {
        let s = random_matrix(60, 8, 2, 3.0);
        let theta = random_matrix(60, 3, 3, 1.0);
        let t = fit_pls(s.view(), theta.view(), 5).unwrap();
        let scores = t.apply_matrix(s.view()).unwrap();
        let gram = scores.t().dot(&scores);
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    let rel = gram[(a, b)].abs() / (gram[(a, a)] * gram[(b, b)]).sqrt();
                    assert!(rel < 1e-8, "scores {a} and {b} correlate: {rel}");
                }
            }
        }
    }

    /// NIPALS power iteration for the first weight vector, as an oracle.
    fn nipals_first_weight(s: &Array2<f64>, theta: &Array2<f64>) -> Vec<f64> {
        let n = s.nrows();
        let q = s.ncols();
        let mut x0 = s.clone();
        for j in 0..q {
            let mean = x0.column(j).sum() / n as f64;
            x0.column_mut(j).mapv_inplace(|v| v - mean);
        }
        let mut y0 = theta.clone();
        for j in 0..theta.ncols() {
            let mean = y0.column(j).sum() / n as f64;
            y0.column_mut(j).mapv_inplace(|v| v - mean);
        }
        let mut u = y0.column(0).to_owned();
        let mut w = Array1::zeros(q);
        for _ in 0..500 {
            w = x0.t().dot(&u);
            let norm = w.dot(&w).sqrt();
            w.mapv_inplace(|v| v / norm);
            let t = x0.dot(&w);
            let c = y0.t().dot(&t).mapv(|v| v / t.dot(&t));
            let u_new = y0.dot(&c).mapv(|v| v / c.dot(&c));
            let delta = (&u_new - &u).mapv(|v| v * v).sum();
            u = u_new;
            if delta < 1e-24 {
                break;
            }
        }
        w.to_vec()
    }

    #[test]
    fn first_component_matches_nipals_oracle() {
        let s = random_matrix(80, 6, 4, 2.0);
        let mut rng = stream_rng(23, 43, 0);
        let theta = Array2::from_shape_fn((80, 2), |(i, _)| {
            s[(i, 1)] * 2.0 - s[(i, 4)] + rng.gen_range(-0.3..0.3)
        });
        let t = fit_pls(s.view(), theta.view(), 1).unwrap();
        let w_pls = match t.kind() {
            TransformKind::PlsScores { weights, .. } => weights.column(0).to_owned(),
            _ => unreachable!(),
        };
        let w_oracle = nipals_first_weight(&s, &theta);
        let dot: f64 = w_pls.iter().zip(&w_oracle).map(|(a, b)| a * b).sum();
        let cos = dot / (w_pls.dot(&w_pls).sqrt());
        assert!((cos.abs() - 1.0).abs() < 1e-6, "cos = {cos}");
    }

    #[test]
    fn larger_fits_contain_smaller_ones_exactly() {
        let s = random_matrix(30, 7, 5, 1.5);
        let theta = random_matrix(30, 2, 6, 1.0);
        let big = fit_pls(s.view(), theta.view(), 5).unwrap();
        for k in 1..=5 {
            let small = fit_pls(s.view(), theta.view(), k).unwrap();
            assert_eq!(big.truncated(k).unwrap(), small, "k = {k}");
        }
    }

    #[test]
    fn component_bounds_are_enforced() {
        let s = random_matrix(10, 4, 7, 1.0);
        let theta = random_matrix(10, 1, 8, 1.0);
        assert!(fit_pls(s.view(), theta.view(), 0).is_err());
        assert!(fit_pls(s.view(), theta.view(), 5).is_err()); // > q
        let tiny = random_matrix(3, 8, 9, 1.0);
        let tiny_theta = random_matrix(3, 1, 10, 1.0);
        assert!(fit_pls(tiny.view(), tiny_theta.view(), 3).is_err()); // > n - 1
    }

    #[test]
    fn cv_selects_one_component_for_rank_one_data() {
        let n = 200;
        let q = 10;
        let mut rng = stream_rng(23, 44, 0);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..q).map(|_| rng.gen_range(0.5..1.5)).collect();
        let s = Array2::from_shape_fn((n, q), |(i, j)| {
            u[i] * v[j] + 1e-4 * rng.gen_range(-1.0..1.0)
        });
        let theta = Array2::from_shape_fn((n, 1), |(i, _)| u[i]);
        let chosen = select_pls_components(s.view(), theta.view(), &CvConfig::default()).unwrap();
        assert_eq!(chosen, 1);
    }

    #[test]
    fn cv_selects_one_component_for_pure_noise() {
        let s = random_matrix(200, 8, 11, 1.0);
        let theta = random_matrix(200, 2, 12, 1.0); // independent of s
        let chosen = select_pls_components(s.view(), theta.view(), &CvConfig::default()).unwrap();
        assert_eq!(chosen, 1);
    }

    #[test]
    fn cv_returns_one_for_degenerate_targets() {
        let s = random_matrix(50, 4, 13, 1.0);
        let theta = Array2::from_elem((50, 2), 3.0);
        let chosen = select_pls_components(s.view(), theta.view(), &CvConfig::default()).unwrap();
        assert_eq!(chosen, 1);
    }

    #[test]
    fn cv_is_monotone_in_the_threshold() {
        let n = 150;
        let q = 8;
        let s = random_matrix(n, q, 14, 2.0);
        let mut rng = stream_rng(23, 45, 0);
        let theta = Array2::from_shape_fn((n, 2), |(i, j)| {
            s[(i, 0)] + 0.8 * s[(i, 3)] - 0.5 * s[(i, 5 + j)] + 0.3 * rng.gen_range(-1.0..1.0)
        });
        let mut previous = usize::MAX;
        for threshold in [1e-6, 1e-4, 1e-2, 0.1, 0.9] {
            let cv = CvConfig {
                threshold_frac: threshold,
                ..CvConfig::default()
            };
            let chosen = select_pls_components(s.view(), theta.view(), &cv).unwrap();
            assert!(chosen <= previous, "threshold {threshold} chose {chosen}");
            previous = chosen;
        }
    }

    #[test]
    fn cv_default_matches_protocol() {
        let cv = CvConfig::default();
        assert_eq!(cv.max_components, 15);
        assert_eq!(cv.folds, 10);
        assert_eq!(cv.threshold_frac, 0.01);
    }

    #[test]
    fn cv_is_deterministic_given_the_fold_seed() {
        let s = random_matrix(100, 6, 15, 1.0);
        let theta = random_matrix(100, 2, 16, 1.0);
        let cv = CvConfig {
            fold_seed: 99,
            ..CvConfig::default()
        };
        let a = select_pls_components(s.view(), theta.view(), &cv).unwrap();
        let b = select_pls_components(s.view(), theta.view(), &cv).unwrap();
        assert_eq!(a, b);
    }
}
