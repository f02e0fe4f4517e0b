//! The Ricker map with Poisson observations.
//!
//! Latent population sizes follow
//!
//! ```text
//! N_{t+1} = r N_t exp(-N_t + e_t),    e_t ~ N(0, sigma_e^2),
//! ```
//!
//! from `N_0 = 1`, and counts are observed as `y_t ~ Poisson(phi N_t)`.
//! The dynamics are near-chaotic for the growth rates used in inference
//! benchmarks, which is what makes the model hard for likelihood-based
//! approaches.

use super::{Dataset, PriorSpec};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Default number of simulated time steps.
pub const RICKER_STEPS: usize = 100;
/// Default burn-in; observations come from the remaining steps.
pub const RICKER_BURN_IN: usize = 50;

/// Parameters `(log r, sigma_e, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RickerParams {
    /// Log intrinsic growth rate.
    pub log_r: f64,
    /// Process noise standard deviation, nonnegative (zero gives the
    /// deterministic recursion).
    pub sigma_e: f64,
    /// Observation scale, nonnegative.
    pub phi: f64,
}

impl RickerParams {
    pub fn new(log_r: f64, sigma_e: f64, phi: f64) -> Result<Self> {
        if ![log_r, sigma_e, phi].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Ricker parameter".into()));
        }
        if sigma_e < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sigma_e must be nonnegative, got {sigma_e}"
            )));
        }
        if phi < 0.0 {
            return Err(Error::InvalidArgument(format!("phi must be nonnegative, got {phi}")));
        }
        Ok(Self { log_r, sigma_e, phi })
    }

    /// Builds parameters from a table row `(log r, log sigma_e, phi)`.
    ///
    /// The prior is uniform over `log sigma_e`, so tables store the noise
    /// level on the log scale; the simulator wants it natural.
    pub fn from_vector(theta: &[f64]) -> Result<Self> {
        if theta.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "Ricker expects 3 parameters, got {}",
                theta.len()
            )));
        }
        Self::new(theta[0], theta[1].exp(), theta[2])
    }
}

/// Simulates the latent path `N_1, ..., N_steps` from `N_0 = 1`.
pub fn ricker_states<R: Rng + ?Sized>(
    params: &RickerParams,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let r = params.log_r.exp();
    let mut states = Vec::with_capacity(steps);
    let mut n = 1.0f64;
    for t in 0..steps {
        let e: f64 = {
            let z: f64 = StandardNormal.sample(rng);
            params.sigma_e * z
        };
        n = r * n * (-n + e).exp();
        if !n.is_finite() {
            return Err(Error::SimulationFailure(format!(
                "latent state overflowed at step {} (log r = {})",
                t + 1,
                params.log_r
            )));
        }
        states.push(n);
    }
    Ok(states)
}

/// Simulates observed counts `y_{burn_in+1}, ..., y_steps`.
pub fn simulate_ricker<R: Rng + ?Sized>(
    params: &RickerParams,
    steps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if steps <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "steps ({steps}) must exceed burn-in ({burn_in})"
        )));
    }
    let states = ricker_states(params, steps, rng)?;
    let mut observations = Vec::with_capacity(steps - burn_in);
    for &n in &states[burn_in..] {
        let lambda = params.phi * n;
        // Chaotic crashes push the latent state to denormal territory.
        // rand_distr's Poisson misbehaves once exp(-lambda) rounds to 1
        // (returns -1), so rates that small are sampled by inversion:
        // P(y >= 2) < 1e-24 there, a single uniform decides 0 vs 1.
        let y = if lambda == 0.0 {
            0.0
        } else if lambda < 1e-12 {
            let u: f64 = rng.gen();
            if u < lambda {
                1.0
            } else {
                0.0
            }
        } else {
            let dist = Poisson::new(lambda).map_err(|_| {
                Error::SimulationFailure(format!("invalid Poisson rate {lambda}"))
            })?;
            dist.sample(rng)
        };
        observations.push(y);
    }
    Ok(observations)
}

/// Priors from the standard benchmark: uniform on `log r`, `log sigma_e`
/// and `phi` with ranges `(0, 10)`, `(log 0.1, 0)` and `(0, 100)`.
pub fn ricker_default_prior() -> PriorSpec {
    PriorSpec::new(vec![(0.0, 10.0), (0.1f64.ln(), 0.0), (0.0, 100.0)]).expect("static ranges")
}
