//! Modified Bessel function of the second kind and the Matérn kernel.
//!
//! K_ν for real order uses Temme's series below x = 2 and Steed's continued
//! fraction above (the classic `bessik` scheme), followed by upward
//! recurrence in the order. Values above x = 2 are carried with the factor
//! e^{-x} removed so the kernel never underflows before it is assembled in
//! log space.

use std::f64::consts::PI;

const EPS: f64 = 1e-16;
const MAXIT: usize = 10_000;
const XMIN: f64 = 2.0;

/// Taylor coefficients of 1/Γ(z) = Σ a_k z^k (Abramowitz & Stegun 6.1.34).
const RGAMMA: [f64; 15] = [
    0.0,
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
];

/// (gam1, gam2, 1/Γ(1+μ), 1/Γ(1-μ)) for |μ| <= 1/2, with
/// gam1 = (1/Γ(1-μ) - 1/Γ(1+μ)) / (2μ) and gam2 = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / libm::tgamma(1.0 + mu);
    let gammi = 1.0 / libm::tgamma(1.0 - mu);
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if mu.abs() < 0.1 {
        // the difference cancels; use the even part of the 1/Γ series
        let m2 = mu * mu;
        let mut acc = 0.0;
        let mut pw = 1.0;
        for k in (2..RGAMMA.len()).step_by(2) {
            acc += RGAMMA[k] * pw;
            pw *= m2;
        }
        -acc
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    (gam1, gam2, gampl, gammi)
}

/// Returns (K_ν(x) · s, log s) where s = e^x when x >= 2 and s = 1 otherwise.
fn bessel_k_parts(nu: f64, x: f64) -> (f64, f64) {
    let nl = (nu + 0.5).floor() as i64;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let (mut rkmu, mut rk1, log_scale);
    if x < XMIN {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..=MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= dd / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        rkmu = sum;
        rk1 = sum1 * xi2;
        log_scale = 0.0;
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut c = a1;
        let mut q = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..=MAXIT {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        rkmu = (PI / (2.0 * x)).sqrt() / s;
        rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
        log_scale = x;
    }
    for i in 1..=nl {
        let next = (xmu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = next;
    }
    (rkmu, log_scale)
}

/// K_ν(x) for ν >= 0 and x > 0.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    if !(x > 0.0) || nu.is_nan() {
        return f64::NAN;
    }
    let (v, log_scale) = bessel_k_parts(nu.abs(), x);
    v * (-log_scale).exp()
}

/// ln K_ν(x) for ν >= 0 and x > 0, finite well past the underflow of K_ν.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    if !(x > 0.0) || nu.is_nan() {
        return f64::NAN;
    }
    let (v, log_scale) = bessel_k_parts(nu.abs(), x);
    v.ln() - log_scale
}

/// Half-integer order ν = n + 1/2 if `nu` is one, for small n.
fn half_integer(nu: f64) -> Option<u32> {
    let n = nu - 0.5;
    if (0.0..=20.0).contains(&n) && n == n.round() {
        Some(n as u32)
    } else {
        None
    }
}

/// Unit-variance Matérn kernel 2^{1-ν}/Γ(ν) x^ν K_ν(x), equal to 1 at x = 0.
pub fn matern_kernel(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    if let Some(n) = half_integer(nu) {
        // e^{-x} n!/(2n)! Σ_k (n+k)!/(k!(n-k)!) (2x)^{n-k}
        let mut term = 1.0; // k = n coefficient scaled by n!/(2n)!
        let mut poly = term;
        let tx = 2.0 * x;
        // walk k from n down to 0: coef_{k-1}/coef_k = k / ((n+k)(n-k+1))
        for k in (1..=n).rev() {
            let (kf, nf) = (k as f64, n as f64);
            term *= kf / ((nf + kf) * (nf - kf + 1.0)) * tx;
            poly += term;
        }
        return poly * (-x).exp();
    }
    let ln = (1.0 - nu) * std::f64::consts::LN_2 - libm::lgamma(nu) + nu * x.ln() + ln_bessel_k(nu, x);
    ln.exp().min(1.0)
}
