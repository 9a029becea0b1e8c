//! Correlation functions and correlation matrices over planar sites.
//!
//! Two stationary families are provided. `Exponential` is exp(-h/δ).
//! `Matern` uses the kernel M_ν(x) = 2^{1-ν}/Γ(ν) x^ν K_ν(x) evaluated at
//! x = 2√ν h/δ, the parametrization that the non-stationary model collapses
//! to when its range surface is constant. Note that Matérn with ν = 1/2 is
//! therefore exp(-√2 h/δ), not exp(-h/δ).
//!
//! The non-stationary model is the locally isotropic Matérn obtained by
//! kernel convolution:
//!
//! ρ(s1, s2) = 2 δ1 δ2 / (δ1² + δ2²) · M_ν(2 √(2ν) ‖s1 - s2‖ / √(δ1² + δ2²)).

pub mod bessel;
pub mod field;

use nalgebra::DMatrix;

pub use bessel::{bessel_k, matern_kernel};
pub use field::{GriddedField, ScalarField};

use crate::error::{Error, Result};
use crate::gaussian::CorrelationMatrix;
use crate::geometry::Coord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential,
    Matern { nu: f64 },
}

impl Family {
    pub fn matern(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain(format!("smoothness must be positive, got {nu}")));
        }
        Ok(Family::Matern { nu })
    }

    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Family::Exponential => None,
            Family::Matern { nu } => Some(*nu),
        }
    }
}

/// Isotropic stationary correlation with range δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCorr {
    family: Family,
    range: f64,
}

impl StationaryCorr {
    pub fn new(family: Family, range: f64) -> Result<Self> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::domain(format!("range must be positive, got {range}")));
        }
        if let Family::Matern { nu } = family {
            Family::matern(nu)?;
        }
        Ok(Self { family, range })
    }

    pub fn exponential(range: f64) -> Result<Self> {
        Self::new(Family::Exponential, range)
    }

    pub fn matern(range: f64, nu: f64) -> Result<Self> {
        Self::new(Family::matern(nu)?, range)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn with_range(&self, range: f64) -> Result<Self> {
        Self::new(self.family, range)
    }

    /// Correlation at distance `h >= 0`.
    pub fn corr(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return Err(Error::domain(format!("distance must be non-negative, got {h}")));
        }
        Ok(self.corr_unchecked(h))
    }

    fn corr_unchecked(&self, h: f64) -> f64 {
        match self.family {
            Family::Exponential => (-h / self.range).exp(),
            Family::Matern { nu } => matern_kernel(nu, 2.0 * nu.sqrt() * h / self.range),
        }
    }
}

/// Locally isotropic Matérn with a spatially varying range surface.
#[derive(Debug, Clone, PartialEq)]
pub struct NonstationaryCorr {
    nu: f64,
    range: ScalarField,
}

impl NonstationaryCorr {
    pub fn new(nu: f64, range: ScalarField) -> Result<Self> {
        Family::matern(nu)?;
        Ok(Self { nu, range })
    }

    pub fn smoothness(&self) -> f64 {
        self.nu
    }

    pub fn range_field(&self) -> &ScalarField {
        &self.range
    }

    pub fn corr(&self, s1: &Coord, s2: &Coord) -> Result<f64> {
        let d1 = self.range.eval_positive(s1)?;
        let d2 = self.range.eval_positive(s2)?;
        Ok(Self::corr_with_ranges(self.nu, d1, d2, s1.distance(s2)))
    }

    fn corr_with_ranges(nu: f64, d1: f64, d2: f64, h: f64) -> f64 {
        let ss = d1 * d1 + d2 * d2;
        let pre = 2.0 * d1 * d2 / ss;
        pre * matern_kernel(nu, 2.0 * (2.0 * nu).sqrt() * h / ss.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel {
    Stationary(StationaryCorr),
    Nonstationary(NonstationaryCorr),
}

impl From<StationaryCorr> for CorrelationModel {
    fn from(c: StationaryCorr) -> Self {
        CorrelationModel::Stationary(c)
    }
}

impl From<NonstationaryCorr> for CorrelationModel {
    fn from(c: NonstationaryCorr) -> Self {
        CorrelationModel::Nonstationary(c)
    }
}

impl CorrelationModel {
    pub fn corr(&self, s1: &Coord, s2: &Coord) -> Result<f64> {
        match self {
            CorrelationModel::Stationary(c) => c.corr(s1.distance(s2)),
            CorrelationModel::Nonstationary(c) => c.corr(s1, s2),
        }
    }
}

/// Correlation matrix of `sites` under `model`. Coincident or nearly
/// coincident sites are handled by the jitter policy of
/// [`CorrelationMatrix`]; check [`CorrelationMatrix::jittered`].
pub fn build_corr_matrix(model: &CorrelationModel, sites: &[Coord]) -> Result<CorrelationMatrix> {
    let d = sites.len();
    if d == 0 {
        return Err(Error::domain("no sites"));
    }
    let mut m = DMatrix::identity(d, d);
    match model {
        CorrelationModel::Stationary(c) => {
            for i in 0..d {
                for j in 0..i {
                    let v = c.corr_unchecked(sites[i].distance(&sites[j]));
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        CorrelationModel::Nonstationary(c) => {
            let ranges = sites
                .iter()
                .map(|s| c.range.eval_positive(s))
                .collect::<Result<Vec<_>>>()?;
            for i in 0..d {
                for j in 0..i {
                    let h = sites[i].distance(&sites[j]);
                    let v = NonstationaryCorr::corr_with_ranges(c.nu, ranges[i], ranges[j], h);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
    }
    let cm = CorrelationMatrix::new(m)?;
    if cm.jittered() {
        log::warn!("correlation matrix of {d} sites is near singular; jitter applied");
    }
    Ok(cm)
}
