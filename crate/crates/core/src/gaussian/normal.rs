//! Univariate standard normal primitives.
//!
//! `cdf` and `sf` go through `erfc` so both tails keep full relative
//! precision. `log_cdf` switches to a continued fraction for the Mills ratio
//! below -8, which keeps it finite and accurate far past the point where the
//! cdf itself underflows.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// ln(sqrt(2 pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const MILLS_SWITCH: f64 = -8.0;

#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal distribution function.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 - cdf(x).
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio sf(t)/pdf(t) for t >= 8 by backward evaluation of the
/// Laplace continued fraction.
fn mills_ratio_cf(t: f64) -> f64 {
    let mut g = t;
    for k in (1..=48).rev() {
        g = t + k as f64 / g;
    }
    1.0 / g
}

/// Mills ratio sf(t)/pdf(t), valid for all finite t.
pub fn mills_ratio(t: f64) -> f64 {
    if t >= -MILLS_SWITCH {
        mills_ratio_cf(t)
    } else {
        sf(t) / pdf(t)
    }
}

/// Natural log of the standard normal cdf.
pub fn log_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x >= 0.0 {
        (-sf(x)).ln_1p()
    } else if x >= MILLS_SWITCH {
        cdf(x).ln()
    } else {
        log_pdf(x) + mills_ratio_cf(-x).ln()
    }
}

/// Natural log of the upper tail.
#[inline]
pub fn log_sf(x: f64) -> f64 {
    log_cdf(-x)
}

/// Inverse of the standard normal cdf (Wichura, AS 241, PPND16).
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r + 6.726_577_092_700_87e4) * r
                + 4.592_195_393_154_987e4)
                * r
                + 1.373_169_376_550_946e4)
                * r
                + 1.971_590_950_306_551_3e3)
                * r
                + 1.331_416_678_917_843_8e2)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r + 3.930_789_580_009_271e4) * r
                + 2.121_379_430_158_659_7e4)
                * r
                + 5.394_196_021_424_751e3)
                * r
                + 6.871_870_074_920_579e2)
                * r
                + 4.231_333_070_160_091e1)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let z = tail_quantile((-tail.ln()).sqrt());
    if q < 0.0 {
        -z
    } else {
        z
    }
}

/// AS 241 tail branches, `r = sqrt(-ln(tail))`; returns the positive quantile magnitude.
fn tail_quantile(mut r: f64) -> f64 {
    if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r + 2.417_807_251_774_506e-1) * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r + 1.519_866_656_361_645_7e-2)
                * r
                + 1.481_039_764_274_800_8e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r + 1.242_660_947_388_078_4e-3) * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0)
    }
}

/// Quantile at probability `exp(log_p)`; stays accurate when the probability
/// itself is not representable.
pub fn quantile_from_log(log_p: f64) -> f64 {
    if log_p > -700.0 {
        return quantile(log_p.exp());
    }
    if log_p == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    // log cdf(y) ~ -y^2/2 - ln(-y) - ln sqrt(2 pi); Newton from the leading term.
    let s = -2.0 * log_p;
    let mut y = -(s - (2.0 * PI * s).ln()).sqrt();
    for _ in 0..50 {
        let g = log_cdf(y) - log_p;
        // d/dy log cdf(y) = 1 / mills_ratio(-y)
        let step = g * mills_ratio(-y);
        y -= step;
        if step.abs() <= 1e-15 * y.abs() {
            break;
        }
    }
    y
}

/// E[Y | Y < c] for a standard normal Y.
pub fn truncated_mean_below(c: f64) -> f64 {
    if c == f64::INFINITY {
        return 0.0;
    }
    -(log_pdf(c) - log_cdf(c)).exp()
}
