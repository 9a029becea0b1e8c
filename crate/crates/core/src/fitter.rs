//! Estimation grid, neighborhoods and the parallel sweep of local fits.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::copula::{self, CopulaParams};
use crate::correlation::{Family, StationaryCorr};
use crate::data::{block_bootstrap, BlockPlan, ObservationPanel};
use crate::error::{Error, Result};
use crate::gaussian::QmcConfig;
use crate::geometry::{BBox, Coord};
use crate::likelihood::{
    fit_local, profile_nu, FitOptions, FitOutcome, LikelihoodProblem, ProfileResult, ThresholdSpec, WeightSpec,
    DEFAULT_U_STAR,
};
use crate::seed::{derive_seed, Stream};

/// Regular lattice of estimation points.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationGrid {
    pub bbox: BBox,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major in y.
    pub points: Vec<Coord>,
}

/// Points xmin + i·spacing, ymin + j·spacing inside `bbox`.
pub fn build_grid(bbox: &BBox, spacing: f64) -> Result<EstimationGrid> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
    }
    // tolerate rounding when the extent is a multiple of the spacing
    let count = |extent: f64| (extent / spacing + 1e-9).floor() as usize + 1;
    let (nx, ny) = (count(bbox.width()), count(bbox.height()));
    let points = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Coord::new(bbox.xmin + i as f64 * spacing, bbox.ymin + j as f64 * spacing)))
        .collect();
    Ok(EstimationGrid {
        bbox: *bbox,
        spacing,
        nx,
        ny,
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: Coord,
    /// Station indices, nearest first.
    pub members: Vec<usize>,
    pub distances: Vec<f64>,
    /// Distance to the farthest member (0 when empty).
    pub radius_used: f64,
    pub insufficient: bool,
}

impl Neighborhood {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Up to `d0_cap` stations nearest to `center` within `radius_cap`. Ties in
/// distance keep the station order.
pub fn select_neighborhood(
    center: Coord,
    stations: &[Coord],
    d0_cap: usize,
    radius_cap: f64,
    min_size: usize,
) -> Neighborhood {
    let mut cand: Vec<(f64, usize)> = stations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.distance(&center), i))
        .filter(|(h, _)| *h <= radius_cap)
        .collect();
    cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    cand.truncate(d0_cap);
    Neighborhood {
        center,
        members: cand.iter().map(|c| c.1).collect(),
        distances: cand.iter().map(|c| c.0).collect(),
        radius_used: cand.last().map_or(0.0, |c| c.0),
        insufficient: cand.len() < min_size,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitterConfig {
    pub u_star: f64,
    pub d0_cap: usize,
    /// In the units of the station coordinates.
    pub radius_cap: f64,
    pub min_size: usize,
    pub family: Family,
    /// Points and shifts of the integrator; the seed is derived per grid point.
    pub qmc_points: usize,
    pub qmc_shifts: usize,
    pub fit: FitOptions,
    pub weights: WeightSpec,
    pub seed: u64,
    /// Starting rate; the starting range is the neighborhood's median
    /// inter-station distance unless `init_range` is set.
    pub init_rate: f64,
    pub init_range: Option<f64>,
    /// Grid indices skipped by the sweep.
    pub exclude: Vec<usize>,
}

impl Default for FitterConfig {
    fn default() -> Self {
        Self {
            u_star: DEFAULT_U_STAR,
            d0_cap: 30,
            radius_cap: 150_000.0,
            min_size: 2,
            family: Family::Exponential,
            qmc_points: 256,
            qmc_shifts: 4,
            fit: FitOptions::default(),
            weights: WeightSpec::Hard,
            seed: 0,
            init_rate: 1.0,
            init_range: None,
            exclude: Vec::new(),
        }
    }
}

impl FitterConfig {
    fn qmc_for(&self, index: usize) -> QmcConfig {
        QmcConfig::new(
            self.qmc_points,
            self.qmc_shifts,
            derive_seed(self.seed, Stream::GridPoint, index as u64),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapSummary {
    /// (λ̂, δ̂) of the successful replicates.
    pub replicates: Vec<(f64, f64)>,
    pub failures: usize,
    pub sd_rate: f64,
    pub sd_range: f64,
    /// Standard deviation of χ_h(u) at the configured (h, u), if requested.
    pub sd_chi: Option<f64>,
    /// Fewer than 80% of the replicates succeeded.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalFitResult {
    pub index: usize,
    pub center: Coord,
    pub neighborhood: Neighborhood,
    pub outcome: Option<FitOutcome>,
    pub error: Option<String>,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Local problem at `center` from the member columns of `panel`.
pub fn local_problem(
    panel: &ObservationPanel,
    hood: &Neighborhood,
    config: &FitterConfig,
    qmc: QmcConfig,
) -> Result<LikelihoodProblem> {
    let scores = panel
        .scores()
        .ok_or_else(|| Error::Data("panel must be rank-transformed before fitting".into()))?;
    let d = panel.n_cols();
    let sub: Vec<f64> = (0..panel.n_rows())
        .flat_map(|i| hood.members.iter().map(move |&j| scores[i * d + j]))
        .collect();
    let coords = hood.members.iter().map(|&j| panel.coords()[j]).collect();
    LikelihoodProblem::new(
        sub,
        coords,
        hood.center,
        ThresholdSpec::uniform(config.u_star, hood.size())?,
        config.family,
        qmc,
        config.weights,
    )
}

fn fit_point(index: usize, hood: Neighborhood, panel: &ObservationPanel, config: &FitterConfig) -> LocalFitResult {
    let run = || -> Result<FitOutcome> {
        let problem = local_problem(panel, &hood, config, config.qmc_for(index))?;
        let range = config.init_range.unwrap_or_else(|| problem.typical_distance());
        let init = CopulaParams::new(config.init_rate, StationaryCorr::new(config.family, range)?)?;
        fit_local(&problem, &init, &config.fit)
    };
    let (outcome, error) = match run() {
        Ok(o) => (Some(o), None),
        Err(e) => {
            log::warn!("grid point {index} ({}, {}): {e}", hood.center.x, hood.center.y);
            (None, Some(e.to_string()))
        }
    };
    LocalFitResult {
        index,
        center: hood.center,
        neighborhood: hood,
        outcome,
        error,
        bootstrap: None,
    }
}

fn jobs(grid: &EstimationGrid, panel: &ObservationPanel, config: &FitterConfig) -> Vec<(usize, Neighborhood)> {
    grid.points
        .iter()
        .enumerate()
        .filter(|(i, _)| !config.exclude.contains(i))
        .filter_map(|(i, &c)| {
            let hood = select_neighborhood(c, panel.coords(), config.d0_cap, config.radius_cap, config.min_size);
            if hood.insufficient {
                log::info!("grid point {i} ({}, {}): {} neighbors, skipped", c.x, c.y, hood.size());
                None
            } else {
                Some((i, hood))
            }
        })
        .collect()
}

/// Fits every grid point with a sufficient neighborhood, in parallel.
/// Results are in grid order and do not depend on the number of workers.
pub fn fit_all(grid: &EstimationGrid, panel: &ObservationPanel, config: &FitterConfig) -> Vec<LocalFitResult> {
    jobs(grid, panel, config)
        .into_par_iter()
        .map(|(i, hood)| fit_point(i, hood, panel, config))
        .collect()
}

/// Profile over the Matérn smoothness at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointProfile {
    pub index: usize,
    pub center: Coord,
    pub neighborhood: Neighborhood,
    pub profile: Option<ProfileResult>,
    pub error: Option<String>,
}

/// Fits every grid point at each smoothness of `nu_grid`; `config.family`
/// is ignored.
pub fn profile_all(
    grid: &EstimationGrid,
    panel: &ObservationPanel,
    config: &FitterConfig,
    nu_grid: &[f64],
) -> Vec<PointProfile> {
    jobs(grid, panel, config)
        .into_par_iter()
        .map(|(index, hood)| {
            let run = || -> Result<ProfileResult> {
                let problem = local_problem(panel, &hood, config, config.qmc_for(index))?;
                let range = config.init_range.unwrap_or_else(|| problem.typical_distance());
                let init = CopulaParams::new(config.init_rate, StationaryCorr::exponential(range)?)?;
                profile_nu(&problem, nu_grid, &init, &config.fit)
            };
            let (profile, error) = match run() {
                Ok(p) => (Some(p), None),
                Err(e) => {
                    log::warn!("grid point {index}: {e}");
                    (None, Some(e.to_string()))
                }
            };
            PointProfile {
                index,
                center: hood.center,
                neighborhood: hood,
                profile,
                error,
            }
        })
        .collect()
}

/// Share of points whose likelihood is maximized at each smoothness of
/// `nu_grid`, among points where some fit succeeded.
pub fn profile_shares(profiles: &[PointProfile], nu_grid: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; nu_grid.len()];
    for best in profiles.iter().filter_map(|p| p.profile.as_ref()?.best_nu) {
        if let Some(k) = nu_grid.iter().position(|&nu| nu == best) {
            counts[k] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect()
}

/// Writes `grid_x,grid_y,nu,lambda,delta,loglik,converged,best`, one row per
/// grid point and smoothness.
pub fn write_profiles(path: impl AsRef<Path>, profiles: &[PointProfile], u_star: f64) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "# u_star={u_star}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "grid_x",
        "grid_y",
        "nu",
        "lambda",
        "delta",
        "loglik",
        "converged",
        "best",
    ])?;
    let na = || "NA".to_string();
    for p in profiles {
        let Some(prof) = &p.profile else { continue };
        for e in &prof.entries {
            let f = e.fit.as_ref();
            w.write_record([
                p.center.x.to_string(),
                p.center.y.to_string(),
                e.nu.to_string(),
                f.map_or_else(na, |f| f.params.rate().to_string()),
                f.map_or_else(na, |f| f.params.range().to_string()),
                f.map_or_else(na, |f| f.loglik.to_string()),
                f.is_some_and(|f| f.converged).to_string(),
                (prof.best_nu == Some(e.nu)).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Minimum share of successful replicates for an unflagged summary.
pub const MIN_BOOTSTRAP_SUCCESS: f64 = 0.8;

/// Distance and level at which χ_h(u) uncertainty is summarized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiTarget {
    pub h: f64,
    pub u: f64,
}

/// Fits `grid` on the panel and on `b` block-bootstrap resamples, attaching
/// per-point replicate sets and standard deviations to the main fits.
pub fn bootstrap_fits(
    grid: &EstimationGrid,
    panel: &ObservationPanel,
    b: usize,
    block_length: usize,
    config: &FitterConfig,
    chi: Option<ChiTarget>,
) -> Result<Vec<LocalFitResult>> {
    if b < 2 {
        return Err(Error::Config(format!(
            "at least 2 bootstrap replicates required, got {b}"
        )));
    }
    let plans = (0..b)
        .map(|r| {
            BlockPlan::new(
                panel.n_rows(),
                block_length,
                derive_seed(config.seed, Stream::Bootstrap, r as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut main = fit_all(grid, panel, config);
    let reps: Vec<Vec<LocalFitResult>> = plans
        .par_iter()
        .map(|plan| -> Result<Vec<LocalFitResult>> { Ok(fit_all(grid, &block_bootstrap(panel, plan)?, config)) })
        .collect::<Result<Vec<_>>>()?;
    for (k, res) in main.iter_mut().enumerate() {
        let mut pairs = Vec::new();
        for rep in &reps {
            // the neighborhoods depend only on coordinates, so entry k of every
            // replicate refers to the same grid point
            debug_assert_eq!(rep[k].index, res.index);
            if let Some(o) = &rep[k].outcome {
                pairs.push((o.params.rate(), o.params.range()));
            }
        }
        let failures = b - pairs.len();
        let rates: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ranges: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let sd_chi = match chi {
            Some(t) => {
                let mut vals = Vec::with_capacity(pairs.len());
                for &(l, d) in &pairs {
                    let p = CopulaParams::new(l, StationaryCorr::new(config.family, d)?)?;
                    vals.push(copula::chi_u(&p, t.h, t.u, &QmcConfig::default())?.value);
                }
                Some(sd(&vals))
            }
            None => None,
        };
        let flagged = (pairs.len() as f64) < MIN_BOOTSTRAP_SUCCESS * b as f64;
        if flagged {
            log::warn!(
                "grid point {}: only {} of {b} bootstrap fits succeeded",
                res.index,
                pairs.len()
            );
        }
        res.bootstrap = Some(BootstrapSummary {
            sd_rate: sd(&rates),
            sd_range: sd(&ranges),
            replicates: pairs,
            failures,
            sd_chi,
            flagged,
        });
    }
    Ok(main)
}

/// Root mean integrated squared error of estimated surfaces against the truth,
/// averaged over replicates and grid points.
pub fn rmise(truth: &[f64], estimates: &[Vec<f64>]) -> Result<f64> {
    if estimates.is_empty() || truth.is_empty() {
        return Err(Error::domain("rmise needs at least one replicate and one point"));
    }
    let mut acc = 0.0;
    for (r, est) in estimates.iter().enumerate() {
        if est.len() != truth.len() {
            return Err(Error::domain(format!(
                "replicate {r} has {} points, the truth has {}",
                est.len(),
                truth.len()
            )));
        }
        acc += est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>();
    }
    Ok((acc / (estimates.len() * truth.len()) as f64).sqrt())
}

fn smoothness_label(family: Family) -> f64 {
    // the exponential family is the ν = 1/2 member in the usual convention
    family.smoothness().unwrap_or(0.5)
}

/// Writes the results table, preceded by `#` comment lines.
pub fn write_results(
    path: impl AsRef<Path>,
    results: &[LocalFitResult],
    config: &FitterConfig,
    comments: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# u_star={}", config.u_star).map_err(io)?;
    let family = match config.family {
        Family::Exponential => "exponential".to_string(),
        Family::Matern { nu } => format!("matern nu={nu}"),
    };
    writeln!(out, "# family={family}").map_err(io)?;
    for c in comments {
        writeln!(out, "# {c}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "grid_x",
        "grid_y",
        "lambda",
        "delta",
        "nu",
        "loglik",
        "converged",
        "n_neighbors",
        "radius_used",
        "sd_lambda",
        "sd_delta",
    ])?;
    let na = || "NA".to_string();
    let nu = smoothness_label(config.family).to_string();
    for r in results {
        let o = r.outcome.as_ref();
        let b = r.bootstrap.as_ref();
        w.write_record([
            r.center.x.to_string(),
            r.center.y.to_string(),
            o.map_or_else(na, |o| o.params.rate().to_string()),
            o.map_or_else(na, |o| o.params.range().to_string()),
            nu.clone(),
            o.map_or_else(na, |o| o.loglik.to_string()),
            o.is_some_and(|o| o.converged).to_string(),
            r.neighborhood.size().to_string(),
            r.neighborhood.radius_used.to_string(),
            b.map_or_else(na, |b| b.sd_rate.to_string()),
            b.map_or_else(na, |b| b.sd_range.to_string()),
        ])?;
    }
    w.flush().map_err(io)
}

/// Writes the successful bootstrap replicates as `grid_x,grid_y,lambda,delta`.
pub fn write_replicates(path: impl AsRef<Path>, results: &[LocalFitResult]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::correlation::field::csv_open_error(path, e))?;
    w.write_record(["grid_x", "grid_y", "lambda", "delta"])?;
    for r in results {
        for (l, d) in r.bootstrap.iter().flat_map(|b| &b.replicates) {
            w.write_record([
                r.center.x.to_string(),
                r.center.y.to_string(),
                l.to_string(),
                d.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
