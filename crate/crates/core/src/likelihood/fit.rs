use super::optim::{nelder_mead, NelderMeadOptions};
use super::{objective, LikelihoodProblem};
use crate::copula::{CopulaParams, RATE_MAX, RATE_MIN};
use crate::correlation::{Family, StationaryCorr};
use crate::error::{Error, Result};

/// Ranges are searched within this factor of the problem's typical distance.
const RANGE_SPAN: f64 = 1e3;

/// Multiplicative offsets (on λ, δ) of the starting lattice around the
/// initial value. The second and third starts sit across the ridge along
/// which λ and δ trade off.
const START_OFFSETS: [(f64, f64); 3] = [(1.0, 1.0), (2.0, 0.5), (0.5, 2.0)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub simplex: NelderMeadOptions,
    /// Number of lattice starts used, 1 to 3.
    pub starts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            simplex: NelderMeadOptions::default(),
            starts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub params: CopulaParams,
    pub loglik: f64,
    /// The best start met the simplex-size criterion.
    pub converged: bool,
    pub evals: usize,
    /// λ̂ sits at the admissible clamp.
    pub rate_at_bound: bool,
    /// δ̂ sits at the edge of its search interval.
    pub range_at_bound: bool,
    pub failed_starts: usize,
}

struct Box2 {
    log_rate: (f64, f64),
    log_range: (f64, f64),
}

impl Box2 {
    fn for_problem(problem: &LikelihoodProblem) -> Self {
        let t = problem.typical_distance();
        Self {
            log_rate: (RATE_MIN.ln(), RATE_MAX.ln()),
            log_range: ((t / RANGE_SPAN).ln(), (t * RANGE_SPAN).ln()),
        }
    }

    fn params(&self, x: &[f64], family: Family) -> Result<CopulaParams> {
        let rate = x[0].clamp(self.log_rate.0, self.log_rate.1).exp();
        let range = x[1].clamp(self.log_range.0, self.log_range.1).exp();
        CopulaParams::new(rate, StationaryCorr::new(family, range)?)
    }
}

fn near(x: f64, bound: f64) -> bool {
    (x - bound).abs() < 1e-2
}

/// Maximizes the local objective over (log λ, log δ) with the problem's
/// correlation family. λ is clamped to the admissible interval; points
/// where the objective is invalid are rejected by the simplex.
pub fn fit_local(problem: &LikelihoodProblem, init: &CopulaParams, opts: &FitOptions) -> Result<FitOutcome> {
    if !(1..=START_OFFSETS.len()).contains(&opts.starts) {
        return Err(Error::Config(format!("starts must be 1..=3, got {}", opts.starts)));
    }
    let family = problem.family();
    let bounds = Box2::for_problem(problem);
    let cost = |x: &[f64]| match bounds.params(x, family).and_then(|p| objective(&p, problem)) {
        Ok(v) => -v,
        Err(e) => {
            log::debug!("rejected point ({:.4}, {:.4}): {e}", x[0], x[1]);
            f64::INFINITY
        }
    };
    let mut best: Option<super::NelderMeadResult> = None;
    let mut evals = 0;
    let mut failed = 0;
    for &(fr, fd) in &START_OFFSETS[..opts.starts] {
        let x0 = [(init.rate() * fr).ln(), (init.range() * fd).ln()];
        match nelder_mead(cost, &x0, &opts.simplex) {
            Some(r) => {
                evals += r.evals;
                if best.as_ref().is_none_or(|b| r.value < b.value) {
                    best = Some(r);
                }
            }
            None => {
                evals += 1;
                failed += 1;
            }
        }
    }
    let mut best = best.ok_or_else(|| {
        Error::Fit(format!(
            "objective invalid at all {} starting points around rate {} range {}",
            opts.starts,
            init.rate(),
            init.range()
        ))
    })?;
    // the objective flattens as λ grows, so the simplex may stall short of
    // the clamp: compare against the clamp directly
    let probe = [bounds.log_rate.1, best.x[1]];
    let at_clamp = cost(&probe);
    evals += 1;
    if at_clamp <= best.value {
        best.x = probe.to_vec();
        best.value = at_clamp;
    }
    let lr = best.x[0].clamp(bounds.log_rate.0, bounds.log_rate.1);
    let ld = best.x[1].clamp(bounds.log_range.0, bounds.log_range.1);
    Ok(FitOutcome {
        params: bounds.params(&best.x, family)?,
        loglik: -best.value,
        converged: best.converged,
        evals,
        rate_at_bound: near(lr, bounds.log_rate.0) || near(lr, bounds.log_rate.1),
        range_at_bound: near(ld, bounds.log_range.0) || near(ld, bounds.log_range.1),
        failed_starts: failed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileEntry {
    pub nu: f64,
    pub fit: Option<FitOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    pub entries: Vec<ProfileEntry>,
    /// Smoothness with the largest maximized log-likelihood, if any fit succeeded.
    pub best_nu: Option<f64>,
}

/// Fits (λ, δ) at each fixed Matérn smoothness in `nu_grid`.
pub fn profile_nu(
    problem: &LikelihoodProblem,
    nu_grid: &[f64],
    init: &CopulaParams,
    opts: &FitOptions,
) -> Result<ProfileResult> {
    if nu_grid.is_empty() {
        return Err(Error::Config("empty smoothness grid".into()));
    }
    let mut entries = Vec::with_capacity(nu_grid.len());
    for &nu in nu_grid {
        let family = Family::matern(nu)?;
        let p = problem.with_family(family);
        let start = CopulaParams::new(init.rate(), StationaryCorr::new(family, init.range())?)?;
        entries.push(match fit_local(&p, &start, opts) {
            Ok(fit) => ProfileEntry {
                nu,
                fit: Some(fit),
                error: None,
            },
            Err(e) => ProfileEntry {
                nu,
                fit: None,
                error: Some(e.to_string()),
            },
        });
    }
    let best_nu = entries
        .iter()
        .filter_map(|e| e.fit.as_ref().map(|f| (e.nu, f.loglik)))
        .fold(None, |acc: Option<(f64, f64)>, (nu, ll)| match acc {
            Some((_, best)) if best >= ll => acc,
            _ => Some((nu, ll)),
        })
        .map(|(nu, _)| nu);
    Ok(ProfileResult { entries, best_nu })
}
