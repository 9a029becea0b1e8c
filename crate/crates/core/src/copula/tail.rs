//! Tail dependence of the exponential factor copula.
//!
//! χ = 2{1 - Φ(A)} with A = λ √{(1 - ρ)/2}, and χ(u) = 2 - {1 - C(u, u)}/(1 - u).
//! Near u = 1 the difference χ(u) - χ is far below the rounding error of the
//! direct formula, so the diagnostics evaluate it as
//!
//! χ(u) - χ = -f(u) + 2Φ(A){1 - g(u)} + 2 g(u) P(X <= A, Y > z - λ)
//!
//! with corr(X, Y) = -√{(1-ρ)/2}, f(u) = {2Q(z) - Q₂(z, z; ρ)}/(1 - u) and
//! g(u) = exp(λ²/2 - λz)/(1 - u), where z = z(u) is the marginal quantile
//! and 1 - u is recomputed from z. log g is formed as
//! log1p(-Q(z)/(1-u)) - log1p(-Q(z-λ)) so 1 - g keeps its digits.

use nalgebra::DMatrix;

use super::joint::joint_cdf;
use super::marginal;
use crate::error::{Error, Result};
use crate::gaussian::bvn::{bvn_cdf, bvn_upper};
use crate::gaussian::normal;
use crate::gaussian::{CorrelationMatrix, Estimate, QmcConfig};

/// Limit χ for a pair with correlation `rho` and common rate `lambda`.
pub fn chi_limit_rho(lambda: f64, rho: f64) -> f64 {
    let a = lambda * (0.5 * (1.0 - rho).max(0.0)).sqrt();
    2.0 * normal::sf(a)
}

/// Limit χ for a pair with site-specific rates: γ = λ1² - 2ρλ1λ2 + λ2².
pub fn chi_limit_pair(lambda1: f64, lambda2: f64, rho: f64) -> f64 {
    let gamma = (lambda1 * lambda1 - 2.0 * rho * lambda1 * lambda2 + lambda2 * lambda2).max(0.0);
    2.0 * normal::sf(0.5 * gamma.sqrt())
}

fn check_level(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("level {u} outside (0, 1)")))
    }
}

/// χ(u) for correlation `rho`, through the bivariate distribution function.
pub fn chi_u_rho(lambda: f64, rho: f64, u: f64, qmc: &QmcConfig) -> Result<Estimate> {
    check_level(u)?;
    if rho >= 1.0 {
        return Ok(Estimate { value: 1.0, error: 0.0 });
    }
    let z = marginal::quantile(u, lambda)?;
    let sigma = CorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))?;
    let c = joint_cdf(&[z, z], lambda, &sigma, qmc)?;
    let tail = 1.0 - u;
    Ok(Estimate {
        value: 2.0 - (1.0 - c.value) / tail,
        error: c.error / tail,
    })
}

/// Ingredients of the expansion of χ(u) - χ near u = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExpansionTerms {
    pub u: f64,
    /// Marginal quantile z(u).
    pub z_u: f64,
    /// f(u) = {1 - Φ₂(z, z; ρ)}/(1 - u), exact.
    pub f_u: f64,
    /// s(u) defined by z(u) = -log(1-u)/λ + λ/2 + s(u), exact.
    pub s_u: f64,
    /// k(u) = {Φ(A) - Φ₂(A, z - λ)}/Φ(A), exact.
    pub k_u: f64,
    /// χ(u) - χ, exact.
    pub gap: f64,
    pub chi_limit: f64,
    /// 2φ(z)/{(1-u) z}.
    pub f_asymptotic: f64,
    /// -φ(z)/{(1-u) z (z - λ)}: the sign that matches the definition of s_u.
    pub s_asymptotic: f64,
    /// +φ(z)/{(1-u) z (z - λ)}: the opposite sign convention.
    pub s_asymptotic_flipped: f64,
    /// φ(z - λ)/{Φ(A)(z - λ)}.
    pub k_asymptotic: f64,
}

impl TailExpansionTerms {
    /// |(χ(u) - χ) + f(u)| / f(u): how far the gap is from its claimed
    /// leading term -f(u).
    pub fn dominant_term_ratio(&self) -> f64 {
        (self.gap + self.f_u).abs() / self.f_u
    }

    /// χ(u) reassembled from the limit and the exact gap.
    pub fn chi_u(&self) -> f64 {
        self.chi_limit + self.gap
    }
}

/// Expansion terms at level u >= 0.9.
pub fn tail_expansion_rho(lambda: f64, rho: f64, u: f64) -> Result<TailExpansionTerms> {
    check_level(u)?;
    if u < 0.9 {
        return Err(Error::domain(format!("expansion needs u >= 0.9, got {u}")));
    }
    if !(rho < 1.0 && rho > -1.0) {
        return Err(Error::domain(format!("correlation {rho} must lie in (-1, 1)")));
    }
    let z = marginal::quantile(u, lambda)?;
    let tail = marginal::sf(z, lambda);
    let a = lambda * (0.5 * (1.0 - rho)).sqrt();
    let chi = 2.0 * normal::sf(a);
    let qz = normal::sf(z);
    let f = (2.0 * qz - bvn_upper(z, z, rho)) / tail;
    let log_g = (-qz / tail).ln_1p() - (-normal::sf(z - lambda)).ln_1p();
    let one_minus_g = -log_g.exp_m1();
    let g = log_g.exp();
    // P(X <= A, Y > z - λ) with corr(X, Y) = -r0 equals P(X <= A, -Y < λ - z)
    let r0 = (0.5 * (1.0 - rho)).sqrt();
    let pxy = bvn_cdf(a, lambda - z, r0);
    let phi_a = normal::cdf(a);
    let gap = -f + 2.0 * phi_a * one_minus_g + 2.0 * g * pxy;
    let ratio_pdf = (normal::log_pdf(z) - tail.ln()).exp();
    Ok(TailExpansionTerms {
        u,
        z_u: z,
        f_u: f,
        s_u: -log_g / lambda,
        k_u: pxy / phi_a,
        gap,
        chi_limit: chi,
        f_asymptotic: 2.0 * ratio_pdf / z,
        s_asymptotic: -ratio_pdf / (z * (z - lambda)),
        s_asymptotic_flipped: ratio_pdf / (z * (z - lambda)),
        k_asymptotic: normal::pdf(z - lambda) / (phi_a * (z - lambda)),
    })
}
