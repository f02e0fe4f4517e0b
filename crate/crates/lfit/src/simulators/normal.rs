//! Standard normal quantile function.

use crate::error::{Error, Result};

/// Quantile function of the standard normal distribution.
///
/// Uses Wichura's rational approximations (algorithm AS 241, PPND16),
/// accurate to well below `1e-12` over the whole open unit interval.
pub fn standard_normal_quantile(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs a probability in (0, 1), got {x}"
        )));
    }

    let q = x - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * poly(&A, r) / poly(&B, r));
    }

    let mut r = if q < 0.0 { x } else { 1.0 - x };
    r = (-r.ln()).sqrt();
    let z = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    Ok(if q < 0.0 { -z } else { z })
}

#[inline]
fn poly(coeffs: &[f64; 8], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946_1e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545_5e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_546,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    2.965_605_718_285_048_9e-1,
    2.653_218_952_657_612_3e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];

#[cfg(test)]
mod tests {
    use super::*;

    /// Standard normal CDF for the oracle, via the complementary error
    /// function evaluated with a power series / continued fraction split.
    /// Independent of the quantile implementation above.
    fn phi(z: f64) -> f64 {
        0.5 * erfc_oracle(-z / std::f64::consts::SQRT_2)
    }

    fn erfc_oracle(x: f64) -> f64 {
        if x < 0.0 {
            return 2.0 - erfc_oracle(-x);
        }
        if x < 2.0 {
            // erf via Taylor series, converges quickly on [0, 2).
            let mut term = x;
            let mut sum = x;
            let x2 = x * x;
            let mut n = 0u32;
            while term.abs() > 1e-18 * sum.abs().max(1e-300) {
                n += 1;
                term *= -x2 / n as f64;
                sum += term / (2 * n + 1) as f64;
            }
            1.0 - 2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            // Continued fraction for erfc on [2, inf).
            let mut f = 0.0;
            for k in (1..=60).rev() {
                f = 0.5 * k as f64 / (x + f);
            }
            (-x * x).exp() / ((x + f) * std::f64::consts::PI.sqrt())
        }
    }

    /// Newton iteration on the CDF oracle. Upper-tail inputs go through
    /// the mirror identity so the iteration always works on the small
    /// tail probability (1 - p is exact for p >= 0.5).
    fn quantile_oracle(p: f64) -> f64 {
        if p > 0.5 {
            return -quantile_oracle(1.0 - p);
        }
        let mut z = 0.0f64;
        for _ in 0..100 {
            let density =
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let step = (phi(z) - p) / density;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        z
    }

    #[test]
    fn median_is_exactly_zero() {
        assert_eq!(standard_normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn matches_newton_oracle_at_0975() {
        let z = standard_normal_quantile(0.975).unwrap();
        assert!((z - quantile_oracle(0.975)).abs() < 1e-12);
        assert!((z - 1.959963985).abs() < 1e-8);
    }

    #[test]
    fn symmetry() {
        let z = standard_normal_quantile(0.3).unwrap();
        let z_mirror = standard_normal_quantile(0.7).unwrap();
        assert!((z + z_mirror).abs() < 1e-15);
    }

    #[test]
    fn matches_oracle_across_the_unit_interval() {
        for &p in &[
            1e-12, 1e-8, 1e-4, 0.01, 0.1, 0.25, 0.4, 0.6, 0.8413447461, 0.9, 0.99, 0.9999,
            1.0 - 1e-8,
        ] {
            let z = standard_normal_quantile(p).unwrap();
            let oracle = quantile_oracle(p);
            assert!(
                (z - oracle).abs() < 1e-12 * oracle.abs().max(1.0),
                "p = {p}: {z} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(standard_normal_quantile(0.0).is_err());
        assert!(standard_normal_quantile(1.0).is_err());
        assert!(standard_normal_quantile(-0.2).is_err());
        assert!(standard_normal_quantile(f64::NAN).is_err());
    }
}
