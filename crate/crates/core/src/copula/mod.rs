//! The exponential factor copula: W(s) = Z(s) + V with a Gaussian process Z
//! and a single Exp(λ) factor V shared by all sites.

pub mod joint;
pub mod marginal;
pub mod tail;

pub use joint::{joint_cdf, joint_cdf_partial, joint_log_density};
pub use tail::{chi_limit_pair, chi_limit_rho, TailExpansionTerms};

use crate::correlation::StationaryCorr;
use crate::error::{Error, Result};
use crate::gaussian::{Estimate, QmcConfig};

/// Admissible rate interval used by every fitting routine.
pub const RATE_MIN: f64 = 1e-3;
pub const RATE_MAX: f64 = 1e3;

/// Rate λ of the factor and the stationary correlation of Z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaParams {
    rate: f64,
    corr: StationaryCorr,
}

impl CopulaParams {
    pub fn new(rate: f64, corr: StationaryCorr) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!("rate must be positive, got {rate}")));
        }
        Ok(Self { rate, corr })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn corr(&self) -> &StationaryCorr {
        &self.corr
    }

    pub fn range(&self) -> f64 {
        self.corr.range()
    }

    pub fn rho(&self, h: f64) -> Result<f64> {
        self.corr.corr(h)
    }
}

/// χ_h = 2{1 - Φ(√γ/2)} with γ = 2λ²{1 - ρ(h)}.
pub fn chi_limit(params: &CopulaParams, h: f64) -> Result<f64> {
    Ok(chi_limit_rho(params.rate, params.rho(h)?))
}

/// χ_h(u) = 2 - {1 - C(u, u)}/(1 - u) for two sites at distance h.
pub fn chi_u(params: &CopulaParams, h: f64, u: f64, qmc: &QmcConfig) -> Result<Estimate> {
    tail::chi_u_rho(params.rate, params.rho(h)?, u, qmc)
}

/// Expansion diagnostics of χ_h(u) - χ_h at level u >= 0.9.
pub fn tail_expansion(params: &CopulaParams, h: f64, u: f64) -> Result<TailExpansionTerms> {
    tail::tail_expansion_rho(params.rate, params.rho(h)?, u)
}
