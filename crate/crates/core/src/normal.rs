//! Standard normal distribution function and its inverse.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_1_SQRT_2;

/// `H(z) = P(N(0,1) <= z)`.
///
/// Evaluated through `erfc` so the lower tail keeps full relative precision
/// down to the subnormal range; below about `z = -38.5` the result is 0.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Quantile function of the standard normal.
///
/// Wichura's AS 241 (PPND16) rational approximations, followed by one Halley
/// step against [`norm_cdf`] so that `norm_cdf(inv_norm_cdf(p))` is accurate
/// to a few ulps of `p`.
pub fn inv_norm_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "inv_norm_cdf",
            value: p,
        });
    }
    let z = ppnd16(p);
    if !z.is_finite() {
        return Ok(z);
    }
    // Halley refinement; skipped where the density underflows.
    let pdf = norm_pdf(z);
    if pdf <= 0.0 {
        return Ok(z);
    }
    let e = if p < 0.5 {
        norm_cdf(z) - p
    } else {
        (1.0 - p) - norm_cdf(-z)
    };
    let u = e / pdf;
    Ok(z - u / (1.0 + 0.5 * z * u))
}

fn ppnd16(p: f64) -> f64 {
    const SPLIT1: f64 = 0.425;
    const SPLIT2: f64 = 5.0;
    const CONST1: f64 = 0.180625;
    const CONST2: f64 = 1.6;

    const A: [f64; 8] = [
        3.387_132_872_796_366_5,
        1.331_416_678_917_843_8e2,
        1.971_590_950_306_551_3e3,
        1.373_169_376_550_946e4,
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
        5.226_495_278_852_545e3,
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
        2.965_605_718_285_048_7e-1,
        2.653_218_952_657_612_4e-2,
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
        2.044_263_103_389_939_8e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return q * ratio(&A, &B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let z = if r <= SPLIT2 {
        ratio(&C, &D, r - CONST2)
    } else {
        ratio(&E, &F, r - SPLIT2)
    };
    if q < 0.0 {
        -z
    } else {
        z
    }
}

fn ratio(num: &[f64; 8], den: &[f64; 8], r: f64) -> f64 {
    let horner = |c: &[f64; 8]| c.iter().rev().fold(0.0, |acc, &k| acc * r + k);
    horner(num) / horner(den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // 50-digit references.
    #[allow(clippy::excessive_precision)]
    const CDF_REF: [(f64, f64); 11] = [
        (-38.0, 2.885_428_360_068_784_3e-316),
        (-20.0, 2.753_624_118_606_233_7e-89),
        (-10.0, 7.619_853_024_160_526e-24),
        (-5.0, 2.866_515_718_791_939e-7),
        (-3.0, 0.001_349_898_031_630_094_5),
        (-1.5, 0.066_807_201_268_858_07),
        (-0.5, 0.308_537_538_725_986_9),
        (0.25, 0.598_706_325_682_923_7),
        (1.0, 0.841_344_746_068_542_9),
        (2.5, 0.993_790_334_674_223_9),
        (6.0, 0.999_999_999_013_412_4),
    ];

    const QUANTILE_REF: [(f64, f64); 10] = [
        (1e-12, -7.034_483_825_301_132),
        (1e-6, -4.753_424_308_822_899),
        (0.001, -3.090_232_306_167_813_5),
        (0.01, -2.326_347_874_040_841),
        (0.05, -1.644_853_626_951_472_7),
        (0.3, -0.524_400_512_708_040_8),
        (0.5, 0.0),
        (0.75, 0.674_489_750_196_081_7),
        (0.975, 1.959_963_984_540_054),
        (0.999_999_999, 5.997_807_019_601_637),
    ];

    #[test]
    fn cdf_matches_reference() {
        for (z, expected) in CDF_REF {
            let got = norm_cdf(z);
            assert!((got - expected).abs() < 1e-15, "z={z}: {got} vs {expected}");
            if expected > 1e-300 {
                assert!(((got - expected) / expected).abs() < 1e-13, "z={z}");
            }
        }
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!(norm_cdf(-40.0) < 1e-300);
    }

    #[test]
    fn quantile_matches_reference() {
        for (p, expected) in QUANTILE_REF {
            let got = inv_norm_cdf(p).unwrap();
            assert!((got - expected).abs() < 1e-12, "p={p}: {got} vs {expected}");
        }
    }

    #[test]
    fn quantile_against_bisection() {
        // independent inverse: bisection on the CDF
        let bisect = |p: f64| {
            let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if norm_cdf(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let z = bisect(0.05);
        assert!((z - (-1.644_853_626_951_472_7)).abs() < 1e-12);
        for p in [1e-10, 0.003, 0.05, 0.2, 0.6, 0.9, 0.999] {
            assert!((inv_norm_cdf(p).unwrap() - bisect(p)).abs() < 1e-9);
        }
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inv_norm_cdf(p), Err(Error::Domain { .. })));
        }
    }

    proptest! {
        #[test]
        fn cdf_symmetry(z in -30.0f64..30.0) {
            prop_assert!((norm_cdf(z) + norm_cdf(-z) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn quantile_round_trip(log_p in -27.6f64..-1e-12, upper in any::<bool>()) {
            // p spans [1e-12, 1 - 1e-12]
            let p = log_p.exp();
            let p = if upper { 1.0 - p } else { p };
            prop_assume!(p > 0.0 && p < 1.0);
            let z = inv_norm_cdf(p).unwrap();
            prop_assert!((norm_cdf(z) - p).abs() < 1e-9);
        }

        #[test]
        fn cdf_monotone(z in -30.0f64..30.0, dz in 1e-6f64..1.0) {
            prop_assert!(norm_cdf(z + dz) >= norm_cdf(z));
        }
    }
}
