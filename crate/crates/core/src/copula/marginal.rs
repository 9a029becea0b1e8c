//! Margins of W = Z + V with Z standard normal and V ~ Exp(λ).
//!
//! F(w) = Φ(w) - exp(λ²/2 - λw) Φ(w - λ) and f(w) = λ exp(λ²/2 - λw) Φ(w - λ).
//! The product exp(λ²/2 - λw) Φ(w - λ) is always formed in log space.

use crate::error::{Error, Result};
use crate::gaussian::normal;

/// ln{exp(λ²/2 - λw) Φ(w - λ)}.
#[inline]
pub fn log_mix_term(w: f64, lambda: f64) -> f64 {
    0.5 * lambda * lambda - lambda * w + normal::log_cdf(w - lambda)
}

/// Distribution function of W.
pub fn cdf(w: f64, lambda: f64) -> f64 {
    if w == f64::INFINITY {
        return 1.0;
    }
    if w == f64::NEG_INFINITY {
        return 0.0;
    }
    (normal::cdf(w) - log_mix_term(w, lambda).exp()).clamp(0.0, 1.0)
}

/// Upper tail 1 - F(w); a sum of two positive terms, accurate far into the tail.
pub fn sf(w: f64, lambda: f64) -> f64 {
    if w == f64::INFINITY {
        return 0.0;
    }
    if w == f64::NEG_INFINITY {
        return 1.0;
    }
    (normal::sf(w) + log_mix_term(w, lambda).exp()).min(1.0)
}

pub fn log_pdf(w: f64, lambda: f64) -> f64 {
    lambda.ln() + log_mix_term(w, lambda)
}

pub fn pdf(w: f64, lambda: f64) -> f64 {
    log_pdf(w, lambda).exp()
}

/// Large-quantile expansion q(t) ≈ log t / λ + λ/2 - t φ(q0) / (log²t/λ² - λ²/4)
/// with q0 = log t / λ + λ/2 and t = 1/(1-u).
pub fn quantile_expansion(u: f64, lambda: f64) -> f64 {
    let lt = -(-u).ln_1p();
    let q0 = lt / lambda + 0.5 * lambda;
    let denom = lt * lt / (lambda * lambda) - 0.25 * lambda * lambda;
    // t φ(q0) = exp(log t + log φ(q0))
    let corr = (lt + normal::log_pdf(q0)).exp() / denom;
    if corr.is_finite() {
        q0 - corr
    } else {
        q0
    }
}

/// Leading-order tail expansion of the distribution function,
/// F(w) ≈ 1 - exp(λ²/2 - λw) + λ φ(w) / {w (w - λ)}, returned as the
/// approximation of 1 - F(w).
pub fn sf_expansion(w: f64, lambda: f64) -> f64 {
    (0.5 * lambda * lambda - lambda * w).exp() - lambda * normal::pdf(w) / (w * (w - lambda))
}

/// Inverse of `cdf`: the w with F(w) = u, for u in (0, 1).
///
/// Safeguarded Newton iteration inside a bracket that is tightened at every
/// step; the residual is measured on the tail that is not close to 1 so the
/// tolerance holds in u-space at both ends.
pub fn quantile(u: f64, lambda: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("probability {u} outside (0, 1)")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(format!("rate must be positive, got {lambda}")));
    }
    let upper = u > 0.5;
    let tail = if upper { 1.0 - u } else { u };
    // residual g(w), increasing in w, with g' = pdf
    let resid = |w: f64| {
        if upper {
            tail - sf(w, lambda)
        } else {
            cdf(w, lambda) - tail
        }
    };
    // F(w) <= Φ(w) gives a lower bound; the upper bound comes from the
    // exponential tail, widened until it brackets.
    let mut lo = normal::quantile(u);
    let mut hi = 0.5 * lambda - (-u).ln_1p() / lambda + 10.0;
    while resid(hi) < 0.0 {
        hi += 10.0 + hi.abs();
    }
    if !lo.is_finite() {
        lo = -40.0;
    }
    let mut w = if u > 0.99 {
        quantile_expansion(u, lambda)
    } else {
        lo + 1.0 / lambda.max(1.0)
    };
    if !(w > lo && w < hi) {
        w = 0.5 * (lo + hi);
    }
    let tol = 1e-13 * tail.max(1e-300);
    for _ in 0..200 {
        let g = resid(w);
        if g.abs() <= tol {
            return Ok(w);
        }
        if g < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let d = pdf(w, lambda);
        let mut next = w - g / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-15 * w.abs().max(1.0) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// Quantile with tail probability `1 - u` given directly; usable where u
/// itself would round to 1.
pub fn quantile_upper(tail: f64, lambda: f64) -> Result<f64> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(Error::domain(format!("tail probability {tail} outside (0, 1)")));
    }
    if tail >= 0.25 {
        return quantile(1.0 - tail, lambda);
    }
    let mut lo = normal::quantile(1.0 - tail.max(1e-16)).min(0.0);
    let mut hi = 0.5 * lambda - tail.ln() / lambda + 10.0;
    while sf(hi, lambda) > tail {
        hi += 10.0 + hi.abs();
    }
    while sf(lo, lambda) < tail {
        lo -= 10.0;
    }
    let lt = -tail.ln();
    let mut w = lt / lambda + 0.5 * lambda;
    if !(w > lo && w < hi) {
        w = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let g = tail - sf(w, lambda);
        if g.abs() <= 1e-13 * tail {
            return Ok(w);
        }
        if g < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let mut next = w - g / pdf(w, lambda);
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-15 * w.abs().max(1.0) {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// λ ∫_0^∞ Φ(w - v) e^{-λ v} dv by composite Simpson on a truncated range.
    fn cdf_oracle(w: f64, lambda: f64) -> f64 {
        let hi = 60.0 / lambda;
        let n = 200_000;
        let step = hi / n as f64;
        let f = |v: f64| lambda * normal::cdf(w - v) * (-lambda * v).exp();
        let mut acc = f(0.0) + f(hi);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * step);
        }
        acc * step / 3.0
    }

    #[test]
    fn cdf_matches_quadrature() {
        assert!(cdf(-40.0, 1.0) < 1e-15);
        let v = cdf(0.0, 1.0);
        assert!((v - cdf_oracle(0.0, 1.0)).abs() < 1e-10);
        // 30-digit evaluation of the closed form
        assert!((v - 0.238_421_708_134_876_6).abs() < 1e-12);
        for &(w, l) in &[(1.3, 0.5), (-0.7, 2.0), (3.0, 4.0)] {
            assert!((cdf(w, l) - cdf_oracle(w, l)).abs() < 1e-10, "w {w} l {l}");
        }
    }

    #[test]
    fn gaussian_limit() {
        // E Φ(w - V) = Φ(w) - φ(w)/λ - w φ(w)/λ² + O(λ^-3), and the cubic
        // term vanishes at w = 1
        let l = 30.0;
        let approx = normal::cdf(1.0) - normal::pdf(1.0) / l - normal::pdf(1.0) / (l * l);
        assert!((cdf(1.0, l) - approx).abs() < 1e-6);
        assert!((cdf(1.0, 1e6) - normal::cdf(1.0)).abs() < 1e-6);
        // density: E φ(V) = φ(0) (1 - E V²/2 + ...)
        assert!((pdf(0.0, l) - normal::pdf(0.0) * (1.0 - 1.0 / (l * l))).abs() < 1e-5);
        assert!((pdf(0.0, 1000.0) - normal::pdf(0.0)).abs() < 1e-5);
    }

    #[test]
    fn pdf_is_derivative_and_integrates_to_one() {
        let (w, l) = (0.7, 2.0);
        let h = 1e-5;
        let fd = (cdf(w + h, l) - cdf(w - h, l)) / (2.0 * h);
        assert!((fd - pdf(w, l)).abs() < 1e-6);

        for &l in &[1.0, 2.0, 7.0] {
            let (a, b) = (-10.0, 10.0 + 10.0 / l);
            let n = 100_000;
            let step = (b - a) / n as f64;
            let mut acc = pdf(a, l) + pdf(b, l);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(a + i as f64 * step, l);
            }
            assert!((acc * step / 3.0 - 1.0).abs() < 1e-8, "lambda {l}");
        }
    }

    #[test]
    fn quantile_round_trip() {
        for &l in &[0.2, 1.0, 3.5, 40.0] {
            for &u in &[1e-8, 0.01, 0.5, 0.95, 0.999, 1.0 - 1e-9] {
                let w = quantile(u, l).unwrap();
                assert!((cdf(w, l) - u).abs() < 1e-10, "u {u} lambda {l}");
            }
        }
        let u0 = cdf(0.0, 1.0);
        assert!(quantile(u0, 1.0).unwrap().abs() < 1e-9);
        assert!(quantile(0.0, 1.0).is_err());
        assert!(quantile(1.0, 1.0).is_err());
    }

    #[test]
    fn upper_quantile_far_tail() {
        for &l in &[0.5, 1.0, 4.0] {
            for &t in &[1e-3, 1e-10, 1e-30] {
                let w = quantile_upper(t, l).unwrap();
                assert!(((sf(w, l) - t) / t).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn quantile_expansion_is_close_for_large_t() {
        let u = 1.0 - 1e-6;
        let exact = quantile(u, 1.0).unwrap();
        let lead = 1e6f64.ln() + 0.5;
        assert!((exact - lead).abs() < 0.05);
        assert!((quantile_expansion(u, 1.0) - exact).abs() < (exact - lead).abs());
    }

    #[test]
    fn tail_expansion_remainder_is_bounded() {
        let l = 1.0;
        let ratios: Vec<f64> = [8.0f64, 10.0, 12.0]
            .iter()
            .map(|&w| {
                // 1 - F = Q(w) + e^{λ²/2-λw} - e^{λ²/2-λw} Q(w-λ); the e^{λ²/2-λw}
                // terms cancel against the expansion analytically
                let shifted = (0.5 * l * l - l * w + normal::log_sf(w - l)).exp();
                let rem = normal::sf(w) - shifted + l * normal::pdf(w) / (w * (w - l));
                rem.abs() / (normal::pdf(w) * w.powi(-4))
            })
            .collect();
        for r in &ratios {
            assert!(r.is_finite() && *r < 10.0, "{ratios:?}");
        }
    }
}
