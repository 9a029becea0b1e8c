//! Exact simulation of the factor copula, stationary and with spatially
//! varying rate and range.
//!
//! A replicate is W(s) = Z(s) + E/λ_s with Z a Gaussian vector drawn through
//! the Cholesky factor of its correlation matrix and E a single standard
//! exponential shared by all sites. Replicates are generated in fixed-size
//! blocks, each with its own derived seed, so the output does not depend on
//! how blocks are scheduled.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::copula::{marginal, CopulaParams};
use crate::correlation::field::csv_open_error;
use crate::correlation::{build_corr_matrix, CorrelationModel, GriddedField, NonstationaryCorr, ScalarField};
use crate::data::{ObservationPanel, StationSet};
use crate::error::{Error, Result};
use crate::geometry::{BBox, Coord};
use crate::seed::{derive_seed, Stream};

/// Replicates per generation block.
const BLOCK: usize = 512;

/// Level of spatial variation of the scenario fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioLabel {
    Weak,
    Mild,
    Strong,
    Custom,
}

impl std::str::FromStr for ScenarioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(Self::Weak),
            "mild" => Ok(Self::Mild),
            "strong" => Ok(Self::Strong),
            "custom" => Ok(Self::Custom),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

impl std::fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Weak => "weak",
            Self::Mild => "mild",
            Self::Strong => "strong",
            Self::Custom => "custom",
        })
    }
}

/// Rate and range surfaces with a fixed Matérn smoothness.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: ScenarioLabel,
    pub rate: ScalarField,
    pub range: ScalarField,
    pub nu: f64,
}

/// Log-rate slope and relative range slope per unit of the normalized
/// abscissa t = (x - x_c)/(w/2), t in [-1, 1].
fn slopes(label: ScenarioLabel) -> Option<(f64, f64)> {
    match label {
        ScenarioLabel::Weak => Some((0.09, 0.09)),
        ScenarioLabel::Mild => Some((0.36, 0.225)),
        ScenarioLabel::Strong => Some((1.125, 0.36)),
        ScenarioLabel::Custom => None,
    }
}

/// Closed-form scenario over `bbox`:
///
/// log λ(s) = log 2 + a t,  δ(s) = (w/9)(1 + b t),  t = (x - x_c)/(w/2),
///
/// with w the box width and (a, b) = (0.09, 0.09), (0.36, 0.225) and
/// (1.125, 0.36) for weak, mild and strong. On [1, 10]² this gives
/// λ in [1.83, 2.19], [1.40, 2.87] and [0.65, 6.16], and δ in
/// [0.91, 1.09], [0.78, 1.23] and [0.64, 1.36].
pub fn make_scenario(label: ScenarioLabel, bbox: &BBox, nu: f64) -> Result<Scenario> {
    let (a, b) = slopes(label).ok_or_else(|| Error::Config("custom scenarios are read from a file".into()))?;
    crate::correlation::Family::matern(nu)?;
    let half = 0.5 * bbox.width();
    let xc = bbox.center().x;
    let scale = bbox.width() / 9.0;
    Ok(Scenario {
        label,
        rate: ScalarField::LogLinear {
            a: 2f64.ln() - a * xc / half,
            bx: a / half,
            by: 0.0,
        },
        range: ScalarField::Linear {
            a: scale * (1.0 - b * xc / half),
            bx: scale * b / half,
            by: 0.0,
        },
        nu,
    })
}

impl Scenario {
    /// Custom scenario from a gridded `x,y,rate,range` file.
    pub fn load_custom(path: impl AsRef<Path>, nu: f64) -> Result<Self> {
        let path = path.as_ref();
        crate::correlation::Family::matern(nu)?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| csv_open_error(path, e))?;
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "y", "rate", "range"] {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "expected header x,y,rate,range".into(),
            });
        }
        let mut rate = Vec::new();
        let mut range = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let mut v = [0.0f64; 4];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = rec[k].parse().map_err(|_| Error::Parse {
                    path: path.into(),
                    line,
                    msg: format!("'{}' is not a number", &rec[k]),
                })?;
            }
            if !(v[2] > 0.0 && v[3] > 0.0 && v.iter().all(|x| x.is_finite())) {
                return Err(Error::Parse {
                    path: path.into(),
                    line,
                    msg: "rate and range must be positive and finite".into(),
                });
            }
            rate.push((v[0], v[1], v[2]));
            range.push((v[0], v[1], v[3]));
        }
        Ok(Self {
            label: ScenarioLabel::Custom,
            rate: ScalarField::Grid(GriddedField::from_points(&rate)?),
            range: ScalarField::Grid(GriddedField::from_points(&range)?),
            nu,
        })
    }
}

/// Simulated values W and the sites' rates, one row per replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub coords: Vec<Coord>,
    pub rates: Vec<f64>,
    pub n_reps: usize,
    /// Row-major n_reps x D.
    pub values: Vec<f64>,
}

impl Simulation {
    /// Uniform scores F(W; λ_s), kept strictly inside (0, 1).
    pub fn scores(&self) -> Vec<f64> {
        let d = self.coords.len();
        let lo = f64::MIN_POSITIVE;
        let hi = 1.0 - f64::EPSILON / 2.0;
        self.values
            .iter()
            .enumerate()
            .map(|(k, &w)| marginal::cdf(w, self.rates[k % d]).clamp(lo, hi))
            .collect()
    }

    /// Panel over stations "s0", "s1", ... with daily synthetic dates, the
    /// simulated values and their scores.
    pub fn to_panel(&self) -> Result<ObservationPanel> {
        let st = StationSet::from_coords(&self.coords);
        let ids: Vec<String> = st.iter().map(|s| s.id.clone()).collect();
        let mut p = ObservationPanel::new(
            crate::data::synthetic_times(self.n_reps),
            ids,
            self.coords.clone(),
            self.values.iter().map(|&v| Some(v)).collect(),
        )?;
        p.set_scores(self.scores());
        Ok(p)
    }
}

fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps == 0 {
        return Err(Error::Config("at least one replicate is required".into()));
    }
    Ok(())
}

fn simulate(sigma: &DMatrix<f64>, rates: &[f64], n_reps: usize, seed: u64) -> Vec<f64> {
    let d = rates.len();
    let inv_rates: Vec<f64> = rates.iter().map(|r| 1.0 / r).collect();
    let n_blocks = n_reps.div_ceil(BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let reps = BLOCK.min(n_reps - b * BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Simulation, b as u64));
            let mut out = Vec::with_capacity(reps * d);
            let mut eps = DVector::zeros(d);
            for _ in 0..reps {
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                let z = sigma * &eps;
                // inverse-cdf exponential; 1 - U lies in (0, 1]
                let e = -(1.0 - rng.random::<f64>()).ln();
                out.extend(z.iter().zip(&inv_rates).map(|(zi, ir)| zi + e * ir));
            }
            out
        })
        .collect();
    blocks.concat()
}

/// Replicates of the stationary model at `sites`.
pub fn simulate_stationary(params: &CopulaParams, sites: &[Coord], n_reps: usize, seed: u64) -> Result<Simulation> {
    check_reps(n_reps)?;
    let sigma = build_corr_matrix(&CorrelationModel::Stationary(*params.corr()), sites)?;
    let rates = vec![params.rate(); sites.len()];
    let values = simulate(sigma.cholesky_factor(), &rates, n_reps, seed);
    Ok(Simulation {
        coords: sites.to_vec(),
        rates,
        n_reps,
        values,
    })
}

/// Replicates of the model with rate λ_s and the non-stationary Matérn
/// correlation of the scenario.
pub fn simulate_nonstationary(scenario: &Scenario, sites: &[Coord], n_reps: usize, seed: u64) -> Result<Simulation> {
    check_reps(n_reps)?;
    let corr = NonstationaryCorr::new(scenario.nu, scenario.range.clone())?;
    let sigma = build_corr_matrix(&CorrelationModel::Nonstationary(corr), sites)?;
    let rates = sites
        .iter()
        .map(|s| scenario.rate.eval_positive(s))
        .collect::<Result<Vec<_>>>()?;
    let values = simulate(sigma.cholesky_factor(), &rates, n_reps, seed);
    Ok(Simulation {
        coords: sites.to_vec(),
        rates,
        n_reps,
        values,
    })
}

/// Writes `id,x,y,rate,range` for each site.
pub fn write_truth(path: impl AsRef<Path>, scenario: &Scenario, sites: &[Coord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    w.write_record(["id", "x", "y", "rate", "range"])?;
    for (i, s) in sites.iter().enumerate() {
        w.write_record([
            format!("s{i}"),
            s.x.to_string(),
            s.y.to_string(),
            scenario.rate.eval_positive(s)?.to_string(),
            scenario.range.eval_positive(s)?.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
