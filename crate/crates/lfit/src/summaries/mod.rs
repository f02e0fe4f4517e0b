//! Candidate summary statistics.
//!
//! Each model gets a fixed, documented list of candidate summaries; the
//! dimension-reduction machinery consumes all of them and decides what
//! matters. Column orders are frozen — they are part of the table format.

mod preprocess;

pub use preprocess::{Preprocessed, Preprocessor};

use crate::error::{Error, Result};

/// Number of Ricker candidate summaries.
pub const RICKER_SUMMARY_COUNT: usize = 124;
/// Length of a Ricker observation window.
pub const RICKER_SERIES_LEN: usize = 50;

/// Autocovariance with the divisor-`n` convention:
///
/// ```text
/// gamma(lag) = (1/n) sum_{t=1}^{n-lag} (y_t - mean)(y_{t+lag} - mean)
/// ```
pub fn autocovariance(series: &[f64], lag: usize) -> Result<f64> {
    let n = series.len();
    if lag >= n {
        return Err(Error::Domain(format!(
            "lag {lag} out of range for a series of length {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for t in 0..n - lag {
        acc += (series[t] - mean) * (series[t + lag] - mean);
    }
    Ok(acc / n as f64)
}

/// Autocorrelation `gamma(lag) / gamma(0)`, defined as 0 for a constant
/// series (zero variance).
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    let var = autocovariance(series, 0)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    Ok(autocovariance(series, lag)? / var)
}

/// The 124 Ricker candidate summaries, in frozen column order:
///
/// 1. autocovariances at lags 1..=5,
/// 2. autocorrelations at lags 1..=5,
/// 3. mean and (divisor-n) variance,
/// 4. counts of observations equal to 0..=4,
/// 5. `ln(1 + sum_t y_t^i)` for powers i = 2..=6,
/// 6. `ln(1 + mean)` and `ln(1 + variance)`,
/// 7. the 50 time-ordered observations,
/// 8. the 50 magnitude-ordered (ascending) observations.
///
/// All logarithms use the `ln(1 + x)` convention so that all-zero datasets
/// (common under wide Ricker priors) stay finite.
pub fn ricker_summaries(dataset: &[f64]) -> Result<Vec<f64>> {
    if dataset.len() != RICKER_SERIES_LEN {
        return Err(Error::DimensionMismatch(format!(
            "Ricker summaries expect {} observations, got {}",
            RICKER_SERIES_LEN,
            dataset.len()
        )));
    }
    let mut out = Vec::with_capacity(RICKER_SUMMARY_COUNT);
    for lag in 1..=5 {
        out.push(autocovariance(dataset, lag)?);
    }
    for lag in 1..=5 {
        out.push(autocorrelation(dataset, lag)?);
    }
    let mean = dataset.iter().sum::<f64>() / dataset.len() as f64;
    let variance = autocovariance(dataset, 0)?;
    out.push(mean);
    out.push(variance);
    for k in 0..5 {
        let target = k as f64;
        out.push(dataset.iter().filter(|&&y| y == target).count() as f64);
    }
    for power in 2..=6 {
        let sum: f64 = dataset.iter().map(|&y| y.powi(power)).sum();
        out.push(sum.ln_1p());
    }
    out.push(mean.ln_1p());
    out.push(variance.ln_1p());
    out.extend_from_slice(dataset);
    let mut sorted = dataset.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    out.extend_from_slice(&sorted);
    debug_assert_eq!(out.len(), RICKER_SUMMARY_COUNT);
    Ok(out)
}

/// Column names matching [`ricker_summaries`].
pub fn ricker_summary_names() -> Vec<String> {
    let mut names = Vec::with_capacity(RICKER_SUMMARY_COUNT);
    for lag in 1..=5 {
        names.push(format!("autocov_lag{lag}"));
    }
    for lag in 1..=5 {
        names.push(format!("autocorr_lag{lag}"));
    }
    names.push("mean".into());
    names.push("variance".into());
    for k in 0..5 {
        names.push(format!("count_eq_{k}"));
    }
    for power in 2..=6 {
        names.push(format!("log1p_sum_pow{power}"));
    }
    names.push("log1p_mean".into());
    names.push("log1p_variance".into());
    for t in 1..=RICKER_SERIES_LEN {
        names.push(format!("y_t{t}"));
    }
    for r in 1..=RICKER_SERIES_LEN {
        names.push(format!("y_sorted{r}"));
    }
    names
}

/// Evenly spaced order statistics of the dataset.
///
/// The j-th summary (1-based) is the order statistic at rank
/// `clamp(round((j - 0.5) n / n_quantiles), 1, n)`, so the output is
/// monotone nondecreasing by construction.
pub fn gk_summaries(dataset: &[f64], n_quantiles: usize) -> Result<Vec<f64>> {
    let n = dataset.len();
    if n_quantiles == 0 || n_quantiles > n {
        return Err(Error::InvalidArgument(format!(
            "cannot take {n_quantiles} quantiles from {n} observations"
        )));
    }
    let mut sorted = dataset.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(quantile_ranks(n, n_quantiles)
        .into_iter()
        .map(|rank| sorted[rank - 1])
        .collect())
}

/// 1-based ranks selected by [`gk_summaries`].
pub fn quantile_ranks(n: usize, n_quantiles: usize) -> Vec<usize> {
    (1..=n_quantiles)
        .map(|j| {
            let raw = ((j as f64 - 0.5) * n as f64 / n_quantiles as f64).round();
            (raw as usize).clamp(1, n)
        })
        .collect()
}

/// Column names matching [`gk_summaries`].
pub fn gk_summary_names(n_quantiles: usize) -> Vec<String> {
    (1..=n_quantiles).map(|j| format!("quantile_{j}")).collect()
}
