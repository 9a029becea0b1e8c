//! Empirical and model-based χ_h(u) curves and joint return periods.

use std::path::Path;

use crate::copula::{self, marginal, CopulaParams};
use crate::correlation::field::csv_open_error;
use crate::correlation::{Family, StationaryCorr};
use crate::data::{io, BlockPlan};
use crate::error::{Error, Result};
use crate::gaussian::QmcConfig;
use crate::geometry::Coord;
use crate::seed::{derive_seed, Stream};
use crate::simulate::simulate_stationary;

/// Default number of time replicates per year (90 winter days of 5-day totals).
pub const REPLICATES_PER_YEAR: f64 = 18.0;

/// Below this many paired observations the empirical estimate is noisy
/// enough to warrant a warning.
const FEW_PAIRS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Empirical,
    Model,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiCurve {
    pub u: Vec<f64>,
    /// `None` where the estimate is undefined (no exceedance of u).
    pub estimate: Vec<Option<f64>>,
    pub envelope: Option<Envelope>,
    pub provenance: Provenance,
}

fn check_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.is_empty() {
        return Err(Error::Config("empty level grid".into()));
    }
    if u_grid.iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::Config("levels must lie in (0, 1)".into()));
    }
    if u_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("levels must be strictly increasing".into()));
    }
    Ok(())
}

/// χ̂(u) = #{u₁ > u, u₂ > u} / #{u₂ > u} over rows where both scores exist.
pub fn empirical_chi(scores1: &[f64], scores2: &[f64], u_grid: &[f64]) -> Result<ChiCurve> {
    check_grid(u_grid)?;
    if scores1.len() != scores2.len() {
        return Err(Error::Data("score columns differ in length".into()));
    }
    let pairs: Vec<(f64, f64)> = scores1
        .iter()
        .zip(scores2)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(&a, &b)| (a, b))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Data("no rows where both stations are observed".into()));
    }
    if pairs.len() < FEW_PAIRS {
        log::warn!("empirical chi from only {} paired rows", pairs.len());
    }
    let estimate = u_grid
        .iter()
        .map(|&u| {
            let den = pairs.iter().filter(|p| p.1 > u).count();
            let num = pairs.iter().filter(|p| p.0 > u && p.1 > u).count();
            (den > 0).then(|| num as f64 / den as f64)
        })
        .collect();
    Ok(ChiCurve {
        u: u_grid.to_vec(),
        estimate,
        envelope: None,
        provenance: Provenance::Empirical,
    })
}

/// Empirical χ̂ with a pointwise envelope at `level` from block-bootstrap
/// resamples of the paired rows. Envelope entries are NaN where no
/// resample defines the estimate.
pub fn empirical_chi_envelope(
    scores1: &[f64],
    scores2: &[f64],
    u_grid: &[f64],
    plans: &[BlockPlan],
    level: f64,
) -> Result<ChiCurve> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("envelope level {level} outside (0, 1)")));
    }
    let mut curve = empirical_chi(scores1, scores2, u_grid)?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(plans.len()); u_grid.len()];
    for plan in plans {
        if plan.n_rows() != scores1.len() {
            return Err(Error::Config("bootstrap plan does not match the series length".into()));
        }
        let rows = plan.draw_rows();
        let a: Vec<f64> = rows.iter().map(|&i| scores1[i]).collect();
        let b: Vec<f64> = rows.iter().map(|&i| scores2[i]).collect();
        // a resample may lose every paired row
        let Ok(rep) = empirical_chi(&a, &b, u_grid) else {
            continue;
        };
        for (k, e) in rep.estimate.iter().enumerate() {
            if let Some(v) = e {
                cols[k].push(*v);
            }
        }
    }
    let mut lower = Vec::with_capacity(u_grid.len());
    let mut upper = Vec::with_capacity(u_grid.len());
    for (col, est) in cols.iter_mut().zip(&curve.estimate) {
        let (lo, hi) = match (col.is_empty(), est) {
            (true, _) => (f64::NAN, f64::NAN),
            (false, Some(e)) => interval(col, level, *e),
            (false, None) => {
                col.sort_by(f64::total_cmp);
                let a = 0.5 * (1.0 - level);
                (quantile_sorted(col, a), quantile_sorted(col, 1.0 - a))
            }
        };
        lower.push(lo);
        upper.push(hi);
    }
    curve.envelope = Some(Envelope { lower, upper, level });
    Ok(curve)
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, frac) = (pos.floor() as usize, pos.fract());
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    if frac == 0.0 {
        return sorted[lo];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Equal-tailed interval at `level` of the values, widened to contain `center`.
fn interval(values: &mut [f64], level: f64, center: f64) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let a = 0.5 * (1.0 - level);
    let lo = quantile_sorted(values, a);
    let hi = quantile_sorted(values, 1.0 - a);
    (lo.min(center), hi.max(center))
}

/// χ_h(u) of the fitted model on `u_grid`; with bootstrap replicates, a
/// pointwise envelope at `level` (widened where needed to contain the curve).
pub fn model_chi_curve(
    params: &CopulaParams,
    h: f64,
    u_grid: &[f64],
    qmc: &QmcConfig,
    replicates: Option<(&[CopulaParams], f64)>,
) -> Result<ChiCurve> {
    check_grid(u_grid)?;
    let curve = |p: &CopulaParams| -> Result<Vec<f64>> {
        u_grid.iter().map(|&u| Ok(copula::chi_u(p, h, u, qmc)?.value)).collect()
    };
    let est = curve(params)?;
    let envelope = match replicates {
        Some((reps, level)) if !reps.is_empty() => {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::Config(format!("envelope level {level} outside (0, 1)")));
            }
            let curves = reps.iter().map(curve).collect::<Result<Vec<_>>>()?;
            let mut lower = Vec::with_capacity(u_grid.len());
            let mut upper = Vec::with_capacity(u_grid.len());
            for (k, &e) in est.iter().enumerate() {
                let mut col: Vec<f64> = curves.iter().map(|c| c[k]).collect();
                let (lo, hi) = interval(&mut col, level, e);
                lower.push(lo);
                upper.push(hi);
            }
            Some(Envelope { lower, upper, level })
        }
        _ => None,
    };
    Ok(ChiCurve {
        u: u_grid.to_vec(),
        estimate: est.into_iter().map(Some).collect(),
        envelope,
        provenance: Provenance::Model,
    })
}

fn finite_or_na(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}

pub fn write_chi_curve(path: impl AsRef<Path>, curve: &ChiCurve) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    w.write_record(["u", "estimate", "lo", "hi"])?;
    let na = || "NA".to_string();
    for (k, u) in curve.u.iter().enumerate() {
        let env = curve.envelope.as_ref();
        w.write_record([
            u.to_string(),
            curve.estimate[k].map_or_else(na, |v| v.to_string()),
            env.map_or_else(na, |e| finite_or_na(e.lower[k])),
            env.map_or_else(na, |e| finite_or_na(e.upper[k])),
        ])?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPeriod {
    pub u: f64,
    /// Share of simulated replicates with every score above u.
    pub p_hat: f64,
    /// Binomial standard error of `p_hat`.
    pub p_se: f64,
    /// 1/(p̂ · replicates_per_year); +∞ when no replicate exceeded.
    pub years: f64,
    /// When `years` is infinite, the return period implied by one exceedance.
    pub lower_bound: Option<f64>,
    /// Interval from re-simulating under bootstrap parameter replicates.
    pub interval: Option<(f64, f64)>,
}

impl ReturnPeriod {
    pub fn is_infinite(&self) -> bool {
        self.years.is_infinite()
    }
}

/// Share of `n_sims` simulated replicates whose scores all exceed `u`.
fn joint_exceedance(params: &CopulaParams, sites: &[Coord], u: f64, n_sims: usize, seed: u64) -> Result<f64> {
    // scores above u is W above the marginal quantile, which avoids rounding
    // of the cdf near one
    let w_u = marginal::quantile(u, params.rate())?;
    let d = sites.len();
    let sim = simulate_stationary(params, sites, n_sims, seed)?;
    let hits = sim
        .values
        .chunks_exact(d)
        .filter(|row| row.iter().all(|&w| w > w_u))
        .count();
    Ok(hits as f64 / n_sims as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnPeriodOptions {
    pub n_sims: usize,
    pub replicates_per_year: f64,
    pub seed: u64,
    /// Coverage of the bootstrap interval.
    pub level: f64,
}

impl Default for ReturnPeriodOptions {
    fn default() -> Self {
        Self {
            n_sims: 500_000,
            replicates_per_year: REPLICATES_PER_YEAR,
            seed: 0,
            level: 0.95,
        }
    }
}

/// Return period (in years) of all `sites` exceeding level `u` together.
pub fn return_period(
    params: &CopulaParams,
    sites: &[Coord],
    u: f64,
    opts: &ReturnPeriodOptions,
    replicates: Option<&[CopulaParams]>,
) -> Result<ReturnPeriod> {
    if sites.len() < 2 {
        return Err(Error::Config("a joint return period needs at least two sites".into()));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Config(format!("level {u} outside (0, 1)")));
    }
    if opts.n_sims < 10_000 {
        return Err(Error::Config(format!(
            "at least 10^4 simulations required, got {}",
            opts.n_sims
        )));
    }
    if !(opts.replicates_per_year > 0.0) {
        return Err(Error::Config("replicates per year must be positive".into()));
    }
    let rpy = opts.replicates_per_year;
    let to_years = |p: f64| if p > 0.0 { 1.0 / (p * rpy) } else { f64::INFINITY };
    let p = joint_exceedance(
        params,
        sites,
        u,
        opts.n_sims,
        derive_seed(opts.seed, Stream::ReturnPeriod, 0),
    )?;
    let years = to_years(p);
    let interval = match replicates {
        Some(reps) if !reps.is_empty() => {
            let mut rp = reps
                .iter()
                .enumerate()
                .map(|(r, q)| {
                    let s = derive_seed(opts.seed, Stream::ReturnPeriod, r as u64 + 1);
                    Ok(to_years(joint_exceedance(q, sites, u, opts.n_sims, s)?))
                })
                .collect::<Result<Vec<f64>>>()?;
            Some(interval(&mut rp, opts.level, years))
        }
        _ => None,
    };
    Ok(ReturnPeriod {
        u,
        p_hat: p,
        p_se: (p * (1.0 - p) / opts.n_sims as f64).sqrt(),
        years,
        lower_bound: years.is_infinite().then(|| to_years(1.0 / opts.n_sims as f64)),
        interval,
    })
}

/// Writes `state_label,u,rp_years,lo,hi`; infinite periods are written as
/// `inf` with the lower bound in `lo`.
pub fn write_return_periods(path: impl AsRef<Path>, rows: &[(String, ReturnPeriod)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_open_error(path, e))?;
    w.write_record(["state_label", "u", "rp_years", "lo", "hi"])?;
    let na = || "NA".to_string();
    for (label, rp) in rows {
        let (lo, hi) = match (rp.interval, rp.lower_bound) {
            (Some((lo, hi)), _) => (lo.to_string(), hi.to_string()),
            (None, Some(lb)) => (lb.to_string(), na()),
            (None, None) => (na(), na()),
        };
        w.write_record([label.clone(), rp.u.to_string(), rp.years.to_string(), lo, hi])?;
    }
    w.flush().map_err(|e| crate::Error::io(path, e))
}

/// Reads bootstrap parameter replicates from a CSV with `lambda` and `delta`
/// columns. When the file also has `grid_x,grid_y` columns and `near` is
/// given, only the rows of the grid point nearest to `near` are kept.
pub fn load_replicates(path: impl AsRef<Path>, family: Family, near: Option<Coord>) -> Result<Vec<CopulaParams>> {
    let path = path.as_ref();
    let mut rdr = io::reader(path)?;
    let headers = rdr.headers().map_err(|e| io::record_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(cl), Some(cd)) = (col("lambda"), col("delta")) else {
        return Err(io::parse_error(path, 1, "expected columns lambda and delta"));
    };
    let grid = col("grid_x").zip(col("grid_y"));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| io::record_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let at = match grid {
            Some((gx, gy)) => Some(Coord::new(
                io::parse_number(path, line, &rec[gx], "grid_x")?,
                io::parse_number(path, line, &rec[gy], "grid_y")?,
            )),
            None => None,
        };
        let l = io::parse_number(path, line, &rec[cl], "lambda")?;
        let d = io::parse_number(path, line, &rec[cd], "delta")?;
        let p = CopulaParams::new(l, StationaryCorr::new(family, d)?)
            .map_err(|e| io::parse_error(path, line, e.to_string()))?;
        rows.push((at, p));
    }
    if let (Some(target), true) = (near, grid.is_some()) {
        let nearest = rows
            .iter()
            .filter_map(|(at, _)| *at)
            .min_by(|a, b| a.distance(&target).total_cmp(&b.distance(&target)));
        if let Some(c) = nearest {
            rows.retain(|(at, _)| *at == Some(c));
        }
    }
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}
