//! Generative models and prior sampling.
//!
//! Each simulator is a pure function of its parameters, configuration and a
//! seeded random stream; identical seeds produce identical datasets.

mod gk;
mod normal;
mod ricker;
mod toy;

pub use gk::{gk_default_prior, gk_quantile, simulate_gk, GkParams};
pub use normal::standard_normal_quantile;
pub use ricker::{
    ricker_default_prior, ricker_states, simulate_ricker, RickerParams, RICKER_BURN_IN,
    RICKER_STEPS,
};
pub use toy::{simulate_toy, toy_default_prior, toy_response};

use crate::error::{Error, Result};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

/// One simulated dataset: counts for the Ricker map, reals elsewhere.
pub type Dataset = Vec<f64>;

/// Independent uniform prior, one `(lo, hi)` range per parameter component.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    ranges: Vec<(f64, f64)>,
}

impl PriorSpec {
    pub fn new(ranges: Vec<(f64, f64)>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidArgument("prior needs at least one component".into()));
        }
        for (j, &(lo, hi)) in ranges.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "prior component {j} has invalid range ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { ranges })
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }
}

/// Draws one parameter vector from the prior.
pub fn sample_prior<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> Vec<f64> {
    spec.ranges
        .iter()
        .map(|&(lo, hi)| Uniform::new(lo, hi).sample(rng))
        .collect()
}
