//! A one-dimensional toy model with a mildly nonlinear response.
//!
//! Used to exercise the local-versus-global regression machinery: the
//! response is close to linear inside any small neighborhood but visibly
//! curved over the whole prior range.

use super::PriorSpec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// The noiseless response `h(theta) = theta + 0.05 theta^2`.
pub fn toy_response(theta: f64) -> f64 {
    theta + 0.05 * theta * theta
}

/// One noisy observation `S = h(theta) + N(0, noise_sd^2)`.
pub fn simulate_toy<R: Rng + ?Sized>(theta: f64, noise_sd: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    toy_response(theta) + noise_sd * z
}

/// Default prior over theta.
pub fn toy_default_prior() -> PriorSpec {
    PriorSpec::new(vec![(-10.0, 10.0)]).expect("static range")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn response_values() {
        assert_eq!(toy_response(0.0), 0.0);
        assert_eq!(toy_response(10.0), 15.0);
    }

    #[test]
    fn vanishing_noise_recovers_the_response() {
        let s = simulate_toy(10.0, 1e-12, &mut stream_rng(0, 1, 0));
        assert!((s - 15.0).abs() < 1e-9);
        let s = simulate_toy(0.0, 1e-12, &mut stream_rng(0, 1, 0));
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn identical_seeds_give_identical_draws() {
        let a = simulate_toy(2.0, 1.0, &mut stream_rng(9, 9, 9));
        let b = simulate_toy(2.0, 1.0, &mut stream_rng(9, 9, 9));
        assert_eq!(a, b);
    }
}
