// `!(x > 0.0)` style checks are deliberate: they reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use fcopula::copula::CopulaParams;
use fcopula::correlation::{Family, ScalarField, StationaryCorr};
use fcopula::data::{
    load_panel, load_stations, rank_transform, synthetic_times, write_panel, write_stations, BlockPlan,
    ObservationPanel, PanelColumn, StationSet,
};
use fcopula::fitter::{self, ChiTarget, EstimationGrid, FitterConfig};
use fcopula::gaussian::QmcConfig;
use fcopula::geometry::{BBox, Coord};
use fcopula::likelihood::{FitOptions, WeightSpec};
use fcopula::risk::{self, ReturnPeriodOptions};
use fcopula::seed::{derive_seed, Stream};
use fcopula::simulate::{self, make_scenario, Scenario, ScenarioLabel};
use fcopula::{Error, Result};

/// Local censored-likelihood fitting of the exponential factor copula to
/// spatial threshold exceedances.
///
/// Coordinates are planar. Distances in kilometres (--radius-cap-km) assume
/// coordinates in metres. Every random stream derives from --seed.
#[derive(Parser, Debug)]
#[command(name = "fcopula", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// key=value file of defaults (keys are flag names); flags on the command line win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Station file with header id,x,y
    #[arg(long, global = true, value_name = "FILE")]
    stations: Option<PathBuf>,
    /// Observation panel with header time,<station ids>; NA marks missing values
    #[arg(long, global = true, value_name = "FILE")]
    panel: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Global seed
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Censoring threshold on the uniform scale
    #[arg(long, global = true, default_value_t = 0.8)]
    u_star: f64,
    /// Maximum number of stations per neighborhood
    #[arg(long = "d0-cap", global = true, default_value_t = 30)]
    d0_cap: usize,
    /// Neighborhood radius cap in kilometres
    #[arg(long, global = true, default_value_t = 150.0)]
    radius_cap_km: f64,
    /// Matérn smoothness; without it the exponential correlation is used
    #[arg(long, global = true)]
    nu: Option<f64>,
    /// Integration lattice points per random shift
    #[arg(long, global = true, default_value_t = 256)]
    qmc_samples: usize,
    /// Random shifts of the integration lattice
    #[arg(long, global = true, default_value_t = 4)]
    qmc_shifts: usize,
    /// Number of block-bootstrap resamples
    #[arg(long, global = true, default_value_t = 300)]
    blocks: usize,
    /// Block length in time steps (6 five-day totals is about a month)
    #[arg(long, global = true, default_value_t = 6)]
    block_length: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a panel from a stationary model or a non-stationary scenario
    Simulate(SimulateArgs),
    /// Fit the local model at every point of an estimation grid
    Fit(FitArgs),
    /// Empirical and model-based χ_h(u) curves
    Chi(ChiArgs),
    /// Local fits with block-bootstrap standard deviations
    Bootstrap(BootstrapArgs),
    /// Joint return periods of a set of stations
    ReturnPeriod(ReturnPeriodArgs),
    /// Local fits over a grid of Matérn smoothness values
    ProfileNu(ProfileArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Non-stationary scenario: weak, mild, strong or custom
    #[arg(long)]
    scenario: Option<ScenarioLabel>,
    /// Fields of a custom scenario, header x,y,rate,range
    #[arg(long, value_name = "FILE")]
    scenario_file: Option<PathBuf>,
    /// Rate of a stationary model (with --range)
    #[arg(long, conflicts_with = "scenario")]
    rate: Option<f64>,
    /// Range of a stationary model (with --rate)
    #[arg(long, conflicts_with = "scenario")]
    range: Option<f64>,
    /// Domain as xmin,ymin,xmax,ymax
    #[arg(long, value_delimiter = ',', default_value = "1,1,10,10")]
    bbox: Vec<f64>,
    /// Sites per side of a regular lattice over the domain (ignored with --stations)
    #[arg(long, default_value_t = 25)]
    sites_per_side: usize,
    /// Number of replicates
    #[arg(long, default_value_t = 500)]
    reps: usize,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Estimation grid extent as xmin,ymin,xmax,ymax (default: the stations' bounding box)
    #[arg(long, value_delimiter = ',')]
    grid_bbox: Option<Vec<f64>>,
    /// Estimation grid spacing (default: 10 points along the longer side)
    #[arg(long)]
    grid_spacing: Option<f64>,
    /// Minimum number of records for a station to be used
    #[arg(long, default_value_t = fcopula::data::MIN_RECORDS)]
    min_records: usize,
    /// Number of optimizer starts, 1 to 3
    #[arg(long, default_value_t = 3)]
    starts: usize,
    /// Starting rate of the optimizer
    #[arg(long, default_value_t = 1.0)]
    init_rate: f64,
    /// Biweight kernel bandwidth; without it all neighbors get weight one
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Distance at which to report the standard deviation of χ_h(u) (with --chi-u)
    #[arg(long, requires = "chi_u")]
    chi_h: Option<f64>,
    /// Level at which to report the standard deviation of χ_h(u) (with --chi-h)
    #[arg(long, requires = "chi_h")]
    chi_u: Option<f64>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Smoothness values to compare
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5")]
    nu_grid: Vec<f64>,
}

#[derive(Args, Debug)]
struct ChiArgs {
    /// Two station ids for the empirical curve (needs --stations and --panel)
    #[arg(long, value_delimiter = ',')]
    pair: Option<Vec<String>>,
    /// Levels, strictly increasing in (0, 1)
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5,0.6,0.7,0.8,0.85,0.9,0.95,0.975,0.99,0.995"
    )]
    u: Vec<f64>,
    /// Block-bootstrap envelope for the empirical curve (--blocks, --block-length)
    #[arg(long)]
    envelope: bool,
    /// Minimum number of records for a station to be used
    #[arg(long, default_value_t = fcopula::data::MIN_RECORDS)]
    min_records: usize,
    /// Fitted rate for the model curve
    #[arg(long, requires_all = ["delta", "h"])]
    lambda: Option<f64>,
    /// Fitted range for the model curve
    #[arg(long, requires = "lambda")]
    delta: Option<f64>,
    /// Distance for the model curve
    #[arg(long, requires = "lambda")]
    h: Option<f64>,
    /// Bootstrap replicates (lambda,delta columns) for a model envelope
    #[arg(long, value_name = "FILE", requires = "lambda")]
    replicates: Option<PathBuf>,
    /// Envelope coverage
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

#[derive(Args, Debug)]
struct ReturnPeriodArgs {
    /// Fitted rate
    #[arg(long)]
    lambda: f64,
    /// Fitted range
    #[arg(long)]
    delta: f64,
    /// Station ids of the joint event (default: every station)
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<String>>,
    /// Levels on the uniform scale
    #[arg(long, value_delimiter = ',', default_value = "0.94,0.95,0.96,0.97,0.98,0.99")]
    u: Vec<f64>,
    /// Simulated replicates per level, at least 10^4
    #[arg(long, default_value_t = 1_000_000)]
    n_sims: usize,
    /// Time replicates per year
    #[arg(long, default_value_t = risk::REPLICATES_PER_YEAR)]
    replicates_per_year: f64,
    /// Bootstrap replicates (lambda,delta columns; grid_x,grid_y select the
    /// grid point nearest the sites) for a confidence interval
    #[arg(long, value_name = "FILE")]
    replicates: Option<PathBuf>,
    /// Interval coverage
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Label written in the state_label column
    #[arg(long, default_value = "region")]
    label: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_args(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(Parsed::Clap(e)) => e.exit(),
        Err(Parsed::Config(e)) => {
            // a bad config file is a usage error whatever its kind
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

enum Parsed {
    Clap(clap::Error),
    Config(Error),
}

/// Parses the command line; values from --config fill in flags that were not
/// given on the command line.
fn parse_args(raw: Vec<OsString>) -> std::result::Result<Cli, Parsed> {
    let mut cmd = Cli::command();
    cmd.build();
    let matches = cmd.clone().try_get_matches_from(&raw).map_err(Parsed::Clap)?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let Some(path) = sub.get_one::<PathBuf>("config").cloned() else {
        return Cli::from_arg_matches(&matches).map_err(Parsed::Clap);
    };
    let text = fs::read_to_string(&path).map_err(|e| {
        Parsed::Config(Error::Io {
            path: path.clone(),
            source: e,
        })
    })?;
    let target = cmd.find_subcommand(name).expect("known subcommand");
    let mut extra: Vec<OsString> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| {
            Parsed::Config(Error::Parse {
                path: path.clone(),
                line: n + 1,
                msg,
            })
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad("expected key=value".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        let id = key.replace('-', "_");
        if id == "config" {
            return Err(bad("a config file cannot name another".into()));
        }
        let Some(arg) = target.get_arguments().find(|a| a.get_id() == id.as_str()) else {
            let elsewhere = cmd
                .get_subcommands()
                .any(|c| c.get_arguments().any(|a| a.get_id() == id.as_str()));
            if elsewhere {
                continue;
            }
            return Err(bad(format!("unknown key '{key}'")));
        };
        if sub.value_source(&id) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = format!("--{}", arg.get_long().expect("every flag has a long name"));
        match arg.get_action() {
            ArgAction::SetTrue => match value {
                "true" => extra.push(long.into()),
                "false" => {}
                _ => return Err(bad(format!("'{key}' takes true or false"))),
            },
            _ => {
                extra.push(long.into());
                extra.push(value.into());
            }
        }
    }
    let mut full = raw;
    full.extend(extra);
    let matches = cmd.try_get_matches_from(&full).map_err(Parsed::Clap)?;
    Cli::from_arg_matches(&matches).map_err(Parsed::Clap)
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.workers {
        if n == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    fs::create_dir_all(&c.out).map_err(|e| Error::Io {
        path: c.out.clone(),
        source: e,
    })?;
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(c, a),
        Command::Fit(a) => cmd_fit(c, a),
        Command::Chi(a) => cmd_chi(c, a),
        Command::Bootstrap(a) => cmd_bootstrap(c, a),
        Command::ReturnPeriod(a) => cmd_return_period(c, a),
        Command::ProfileNu(a) => cmd_profile(c, a),
    }
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    v.as_deref().ok_or_else(|| Error::Config(format!("{flag} is required")))
}

fn family(c: &Common) -> Result<Family> {
    match c.nu {
        Some(nu) => Family::matern(nu),
        None => Ok(Family::Exponential),
    }
}

fn bbox(v: &[f64]) -> Result<BBox> {
    if v.len() != 4 {
        return Err(Error::Config(format!(
            "a box needs xmin,ymin,xmax,ymax, got {} values",
            v.len()
        )));
    }
    BBox::new(v[0], v[1], v[2], v[3])
}

fn cmd_simulate(c: &Common, a: &SimulateArgs) -> Result<()> {
    let domain = bbox(&a.bbox)?;
    let stations = match &c.stations {
        Some(p) => load_stations(p)?,
        None => {
            if a.sites_per_side < 2 {
                return Err(Error::Config("--sites-per-side must be at least 2".into()));
            }
            StationSet::from_coords(&domain.lattice(a.sites_per_side, a.sites_per_side))
        }
    };
    let sites = stations.coords();
    let seed = derive_seed(c.seed, Stream::Simulation, 0);
    let (sim, truth) = match (a.scenario, a.rate, a.range) {
        (Some(label), _, _) => {
            let nu = c.nu.unwrap_or(2.5);
            let scenario = match label {
                ScenarioLabel::Custom => Scenario::load_custom(required(&a.scenario_file, "--scenario-file")?, nu)?,
                _ => make_scenario(label, &domain, nu)?,
            };
            (
                simulate::simulate_nonstationary(&scenario, &sites, a.reps, seed)?,
                scenario,
            )
        }
        (None, Some(rate), Some(range)) => {
            let fam = family(c)?;
            let params = CopulaParams::new(rate, StationaryCorr::new(fam, range)?)?;
            let truth = Scenario {
                label: ScenarioLabel::Custom,
                rate: ScalarField::Constant(rate),
                range: ScalarField::Constant(range),
                nu: fam.smoothness().unwrap_or(0.5),
            };
            (simulate::simulate_stationary(&params, &sites, a.reps, seed)?, truth)
        }
        _ => return Err(Error::Config("give --scenario, or both --rate and --range".into())),
    };
    let ids: Vec<String> = stations.iter().map(|s| s.id.clone()).collect();
    let panel = ObservationPanel::new(
        synthetic_times(a.reps),
        ids,
        sites.clone(),
        sim.values.iter().map(|&v| Some(v)).collect(),
    )?;
    write_panel(c.out.join("panel.csv"), &panel, PanelColumn::Values)?;
    write_stations(c.out.join("stations.csv"), &stations)?;
    write_truth(&c.out.join("truth.csv"), &truth, &stations)
}

/// Like `simulate::write_truth` but with the stations' own ids.
fn write_truth(path: &Path, truth: &Scenario, stations: &StationSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "x", "y", "rate", "range"])?;
    for s in stations.iter() {
        w.write_record([
            s.id.clone(),
            s.coord.x.to_string(),
            s.coord.y.to_string(),
            truth.rate.eval_positive(&s.coord)?.to_string(),
            truth.range.eval_positive(&s.coord)?.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// Stations and the rank-transformed panel.
fn load_scores(c: &Common, min_records: usize) -> Result<(StationSet, ObservationPanel)> {
    let stations = load_stations(required(&c.stations, "--stations")?)?;
    let panel = load_panel(required(&c.panel, "--panel")?, &stations)?;
    let (ranked, report) = rank_transform(&panel, min_records);
    if !report.excluded.is_empty() {
        log::warn!("{} stations below {min_records} records dropped", report.excluded.len());
    }
    if ranked.n_cols() == 0 {
        return Err(Error::Data("no station has enough records".into()));
    }
    Ok((stations, ranked))
}

fn estimation_grid(g: &GridArgs, panel: &ObservationPanel) -> Result<EstimationGrid> {
    let extent = match &g.grid_bbox {
        Some(v) => bbox(v)?,
        None => {
            let xs = panel.coords().iter().map(|c| c.x);
            let ys = panel.coords().iter().map(|c| c.y);
            let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            BBox::new(x0, y0, x1, y1)
                .map_err(|e| Error::Config(format!("stations span no area, give --grid-bbox ({e})")))?
        }
    };
    let spacing = g.grid_spacing.unwrap_or(extent.width().max(extent.height()) / 9.0);
    fitter::build_grid(&extent, spacing)
}

fn fitter_config(c: &Common, g: &GridArgs) -> Result<FitterConfig> {
    if !(c.radius_cap_km > 0.0) {
        return Err(Error::Config("--radius-cap-km must be positive".into()));
    }
    Ok(FitterConfig {
        u_star: c.u_star,
        d0_cap: c.d0_cap,
        radius_cap: c.radius_cap_km * 1000.0,
        family: family(c)?,
        qmc_points: c.qmc_samples,
        qmc_shifts: c.qmc_shifts,
        fit: FitOptions {
            starts: g.starts,
            ..FitOptions::default()
        },
        weights: match g.bandwidth {
            Some(bandwidth) => WeightSpec::Biweight { bandwidth },
            None => WeightSpec::Hard,
        },
        seed: c.seed,
        init_rate: g.init_rate,
        ..FitterConfig::default()
    })
}

fn run_comments(c: &Common) -> Vec<String> {
    vec![
        format!("seed={}", c.seed),
        format!("d0_cap={} radius_cap_km={}", c.d0_cap, c.radius_cap_km),
        format!("qmc={}x{}", c.qmc_samples, c.qmc_shifts),
    ]
}

fn cmd_fit(c: &Common, a: &FitArgs) -> Result<()> {
    let (_, panel) = load_scores(c, a.grid.min_records)?;
    let grid = estimation_grid(&a.grid, &panel)?;
    let config = fitter_config(c, &a.grid)?;
    let results = fitter::fit_all(&grid, &panel, &config);
    fitter::write_results(c.out.join("fits.csv"), &results, &config, &run_comments(c))?;
    all_failed(results.iter().map(|r| r.outcome.is_some()))
}

/// A sweep where no grid point could be fitted is a numerical failure.
fn all_failed(ok: impl Iterator<Item = bool>) -> Result<()> {
    let (mut n, mut good) = (0, 0);
    for o in ok {
        n += 1;
        good += usize::from(o);
    }
    if n > 0 && good == 0 {
        return Err(Error::Fit(format!("all {n} grid points failed")));
    }
    if n == 0 {
        log::warn!("no grid point has enough neighbors");
    }
    Ok(())
}

fn cmd_bootstrap(c: &Common, a: &BootstrapArgs) -> Result<()> {
    let (_, panel) = load_scores(c, a.grid.min_records)?;
    let grid = estimation_grid(&a.grid, &panel)?;
    let config = fitter_config(c, &a.grid)?;
    let chi = a.chi_h.zip(a.chi_u).map(|(h, u)| ChiTarget { h, u });
    let results = fitter::bootstrap_fits(&grid, &panel, c.blocks, c.block_length, &config, chi)?;
    let mut comments = run_comments(c);
    comments.push(format!("blocks={} block_length={}", c.blocks, c.block_length));
    fitter::write_results(c.out.join("bootstrap.csv"), &results, &config, &comments)?;
    fitter::write_replicates(c.out.join("replicates.csv"), &results)?;
    if let Some(t) = chi {
        let mut w = csv::Writer::from_path(c.out.join("chi_sd.csv"))?;
        w.write_record(["grid_x", "grid_y", "h", "u", "sd_chi"])?;
        for r in &results {
            let sd = r.bootstrap.as_ref().and_then(|b| b.sd_chi);
            w.write_record([
                r.center.x.to_string(),
                r.center.y.to_string(),
                t.h.to_string(),
                t.u.to_string(),
                sd.map_or_else(|| "NA".into(), |v| v.to_string()),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: c.out.join("chi_sd.csv"),
            source: e,
        })?;
    }
    all_failed(results.iter().map(|r| r.outcome.is_some()))
}

fn cmd_profile(c: &Common, a: &ProfileArgs) -> Result<()> {
    let (_, panel) = load_scores(c, a.grid.min_records)?;
    let grid = estimation_grid(&a.grid, &panel)?;
    let config = fitter_config(c, &a.grid)?;
    let profiles = fitter::profile_all(&grid, &panel, &config, &a.nu_grid);
    fitter::write_profiles(c.out.join("profile_nu.csv"), &profiles, c.u_star)?;
    let shares = fitter::profile_shares(&profiles, &a.nu_grid);
    let mut w = csv::Writer::from_path(c.out.join("profile_summary.csv"))?;
    w.write_record(["nu", "share"])?;
    for (nu, s) in a.nu_grid.iter().zip(&shares) {
        w.write_record([nu.to_string(), s.to_string()])?;
    }
    w.flush().map_err(|e| Error::Io {
        path: c.out.join("profile_summary.csv"),
        source: e,
    })?;
    all_failed(
        profiles
            .iter()
            .map(|p| p.profile.as_ref().is_some_and(|r| r.best_nu.is_some())),
    )
}

fn cmd_chi(c: &Common, a: &ChiArgs) -> Result<()> {
    if a.pair.is_none() && a.lambda.is_none() {
        return Err(Error::Config(
            "give --pair for an empirical curve or --lambda for a model curve".into(),
        ));
    }
    if let Some(pair) = &a.pair {
        if pair.len() != 2 {
            return Err(Error::Config(format!(
                "--pair takes two station ids, got {}",
                pair.len()
            )));
        }
        let (_, panel) = load_scores(c, a.min_records)?;
        let col = |id: &str| -> Result<Vec<f64>> {
            let j = panel
                .ids()
                .iter()
                .position(|s| s == id)
                .ok_or_else(|| Error::Data(format!("station '{id}' is not in the panel or has too few records")))?;
            Ok((0..panel.n_rows())
                .map(|i| panel.score(i, j).unwrap_or(f64::NAN))
                .collect())
        };
        let (s1, s2) = (col(&pair[0])?, col(&pair[1])?);
        let curve = if a.envelope {
            let plans = (0..c.blocks)
                .map(|r| {
                    BlockPlan::new(
                        panel.n_rows(),
                        c.block_length,
                        derive_seed(c.seed, Stream::Bootstrap, r as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            risk::empirical_chi_envelope(&s1, &s2, &a.u, &plans, a.level)?
        } else {
            risk::empirical_chi(&s1, &s2, &a.u)?
        };
        risk::write_chi_curve(c.out.join("chi_empirical.csv"), &curve)?;
    }
    if let (Some(lambda), Some(delta), Some(h)) = (a.lambda, a.delta, a.h) {
        let fam = family(c)?;
        let params = CopulaParams::new(lambda, StationaryCorr::new(fam, delta)?)?;
        let qmc = QmcConfig::new(c.qmc_samples, c.qmc_shifts, derive_seed(c.seed, Stream::Qmc, 0));
        let reps = match &a.replicates {
            Some(p) => Some(risk::load_replicates(p, fam, None)?),
            None => None,
        };
        let curve = risk::model_chi_curve(&params, h, &a.u, &qmc, reps.as_deref().map(|r| (r, a.level)))?;
        risk::write_chi_curve(c.out.join("chi_model.csv"), &curve)?;
    }
    Ok(())
}

fn cmd_return_period(c: &Common, a: &ReturnPeriodArgs) -> Result<()> {
    let stations = load_stations(required(&c.stations, "--stations")?)?;
    let sites: Vec<Coord> = match &a.sites {
        Some(ids) => ids
            .iter()
            .map(|id| {
                stations
                    .index_of(id)
                    .map(|i| stations.get(i).coord)
                    .ok_or_else(|| Error::Data(format!("unknown station '{id}'")))
            })
            .collect::<Result<_>>()?,
        None => stations.coords(),
    };
    let fam = family(c)?;
    let params = CopulaParams::new(a.lambda, StationaryCorr::new(fam, a.delta)?)?;
    let centroid = Coord::new(
        sites.iter().map(|s| s.x).sum::<f64>() / sites.len() as f64,
        sites.iter().map(|s| s.y).sum::<f64>() / sites.len() as f64,
    );
    let reps = match &a.replicates {
        Some(p) => Some(risk::load_replicates(p, fam, Some(centroid))?),
        None => None,
    };
    let opts = ReturnPeriodOptions {
        n_sims: a.n_sims,
        replicates_per_year: a.replicates_per_year,
        seed: c.seed,
        level: a.level,
    };
    let rows =
        a.u.iter()
            .map(|&u| {
                Ok((
                    a.label.clone(),
                    risk::return_period(&params, &sites, u, &opts, reps.as_deref())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
    risk::write_return_periods(c.out.join("return_periods.csv"), &rows)
}
