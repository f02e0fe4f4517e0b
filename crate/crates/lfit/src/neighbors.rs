//! Distances and exact k-nearest selection.
//!
//! Distances between (transformed) summaries are plain Euclidean. Selection
//! is an exact linear scan: at the table sizes this toolkit targets a scan
//! is both fast enough and trivially verifiable against a full sort.

use crate::error::{Error, Result};
use crate::table::IndexSet;
use std::cmp::Ordering;

/// Euclidean distance between two equal-length vectors.
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc.sqrt())
}

/// Comparison key used throughout: ascending distance, ties broken by
/// ascending index. `total_cmp` keeps the order deterministic even if a
/// caller violates the finiteness precondition.
#[inline]
fn key_cmp(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Selects the `k` rows with the smallest distances.
///
/// Returns exactly `k` indices ordered by `(distance, index)`; every
/// returned distance is `<=` every excluded one, and ties at the boundary
/// go to the smallest index.
pub fn select_k_nearest(distances: &[f64], k: usize) -> Result<IndexSet> {
    select_k_nearest_where(distances, k, |_| true)
}

/// Like [`select_k_nearest`] but only rows for which `keep` returns true
/// are eligible. `k` must not exceed the number of eligible rows.
pub fn select_k_nearest_where<F>(distances: &[f64], k: usize, keep: F) -> Result<IndexSet>
where
    F: Fn(usize) -> bool,
{
    let mut pool = Vec::new();
    select_k_nearest_scratch(distances, k, keep, &mut pool)
}

/// [`select_k_nearest_where`] with a caller-owned scratch buffer, for hot
/// loops that select thousands of times.
pub(crate) fn select_k_nearest_scratch<F>(
    distances: &[f64],
    k: usize,
    keep: F,
    pool: &mut Vec<(f64, usize)>,
) -> Result<IndexSet>
where
    F: Fn(usize) -> bool,
{
    pool.clear();
    pool.extend(
        distances
            .iter()
            .copied()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .map(|(i, d)| (d, i)),
    );
    if k == 0 || k > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} out of range for {} eligible rows",
            pool.len()
        )));
    }
    if k < pool.len() {
        pool.select_nth_unstable_by(k - 1, key_cmp);
        pool.truncate(k);
    }
    pool.sort_unstable_by(key_cmp);
    Ok(IndexSet::from_selection(
        pool.iter().map(|&(_, i)| i).collect(),
    ))
}

/// Full ordering of all rows by `(distance, index)`.
pub fn sort_by_distance(distances: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_unstable_by(|&a, &b| key_cmp(&(distances[a], a), &(distances[b], b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_basics() {
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean_distance(&[1.0], &[4.0]).unwrap(), 3.0);
        assert!(euclidean_distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn distance_is_a_metric_on_random_triples() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(11, 99, 0);
        for _ in 0..200 {
            let a: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let ab = euclidean_distance(&a, &b).unwrap();
            let ba = euclidean_distance(&b, &a).unwrap();
            let ac = euclidean_distance(&a, &c).unwrap();
            let cb = euclidean_distance(&c, &b).unwrap();
            assert!(ab >= 0.0);
            assert_eq!(ab, ba);
            assert!(ab <= ac + cb + 1e-12);
        }
        assert_eq!(euclidean_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn select_examples() {
        let s = select_k_nearest(&[5.0, 1.0, 3.0], 1).unwrap();
        assert_eq!(s.as_slice(), &[1]);

        let s = select_k_nearest(&[5.0, 1.0, 3.0], 3).unwrap();
        assert_eq!(s.as_slice(), &[1, 2, 0]);

        // Tie between rows 0, 1, 2 at distance 2 is broken by index.
        let s = select_k_nearest(&[2.0, 2.0, 2.0, 1.0], 2).unwrap();
        assert_eq!(s.as_slice(), &[3, 0]);
    }

    #[test]
    fn select_rejects_bad_k() {
        assert!(select_k_nearest(&[1.0, 2.0], 0).is_err());
        assert!(select_k_nearest(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn select_excluding_skips_rows() {
        let s = select_k_nearest_where(&[5.0, 1.0, 3.0], 2, |i| i != 1).unwrap();
        assert_eq!(s.as_slice(), &[2, 0]);
    }

    /// Brute-force oracle: full sort by (distance, index), take the prefix.
    fn brute_force(distances: &[f64], k: usize) -> Vec<usize> {
        sort_by_distance(distances)[..k].to_vec()
    }

    proptest! {
        #[test]
        fn matches_brute_force_oracle(
            distances in proptest::collection::vec(0u32..50, 1..100),
            k_frac in 0.0f64..1.0,
        ) {
            let distances: Vec<f64> = distances.into_iter().map(f64::from).collect();
            let n = distances.len();
            let k = 1 + ((n - 1) as f64 * k_frac) as usize;
            let got = select_k_nearest(&distances, k).unwrap();
            let expected = brute_force(&distances, k);
            prop_assert_eq!(got.as_slice(), expected.as_slice());
        }

        #[test]
        fn enlarging_k_extends_prefix(
            distances in proptest::collection::vec(0u32..20, 2..60),
        ) {
            let distances: Vec<f64> = distances.into_iter().map(f64::from).collect();
            let n = distances.len();
            let small = select_k_nearest(&distances, n / 2 + 1).unwrap();
            let big = select_k_nearest(&distances, n).unwrap();
            prop_assert_eq!(small.as_slice(), &big.as_slice()[..small.len()]);
        }
    }
}
