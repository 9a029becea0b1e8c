//! Censored local log-likelihood of the stationary factor copula in a
//! neighborhood, its distance-weighted variant and the local fit.
//!
//! Rows are split by their exceedances of the thresholds u*_j: rows where
//! every station exceeds contribute the copula density, rows where none do
//! contribute log F(w*), and the rest contribute the mixed partial derivative
//! of F over the exceeding stations, evaluated at max(w_ij, w*_j), divided by
//! the exceeding margins. Each row uses only its non-missing stations, so it
//! is scored under the sub-model on those stations.

mod fit;
mod optim;

pub use fit::{fit_local, profile_nu, FitOptions, FitOutcome, ProfileEntry, ProfileResult};
pub use optim::{nelder_mead, NelderMeadOptions, NelderMeadResult};

use std::collections::HashMap;

use crate::copula::{joint_cdf, joint_cdf_partial, joint_log_density, marginal, CopulaParams};
use crate::correlation::{build_corr_matrix, CorrelationModel, Family};
use crate::error::{Error, Result};
use crate::gaussian::{CorrelationMatrix, QmcConfig};
use crate::geometry::Coord;

/// Default censoring probability.
pub const DEFAULT_U_STAR: f64 = 0.8;

/// Per-station censoring probabilities u*_j in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSpec {
    u_star: Vec<f64>,
}

impl ThresholdSpec {
    pub fn new(u_star: Vec<f64>) -> Result<Self> {
        if u_star.is_empty() {
            return Err(Error::Config("no thresholds".into()));
        }
        if let Some(u) = u_star.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::Config(format!("threshold {u} outside (0, 1)")));
        }
        Ok(Self { u_star })
    }

    pub fn uniform(u: f64, d: usize) -> Result<Self> {
        Self::new(vec![u; d])
    }

    pub fn values(&self) -> &[f64] {
        &self.u_star
    }

    pub fn len(&self) -> usize {
        self.u_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_star.is_empty()
    }

    fn leading(&self, j: usize) -> Self {
        Self {
            u_star: self.u_star[..j].to_vec(),
        }
    }
}

/// Weights applied to the nested-neighborhood increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightSpec {
    /// All weights one: the plain censored log-likelihood.
    Hard,
    /// ω(h) = (1 - (h/τ₀)²)₊².
    Biweight { bandwidth: f64 },
}

impl WeightSpec {
    pub fn weight(&self, h: f64) -> f64 {
        match *self {
            WeightSpec::Hard => 1.0,
            WeightSpec::Biweight { bandwidth } => {
                let t = h / bandwidth;
                if t >= 1.0 {
                    0.0
                } else {
                    (1.0 - t * t).powi(2)
                }
            }
        }
    }
}

/// Index sets of the censored likelihood. Row indices refer to the rows of
/// the problem; J_i lists column indices of exceeding stations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CensoredPartition {
    pub nc: Vec<usize>,
    pub fc: Vec<usize>,
    pub pc: Vec<usize>,
    /// J_i for every row in `pc`, in the same order.
    pub exceed: Vec<Vec<usize>>,
    /// Rows with too few non-missing stations.
    pub excluded: Vec<usize>,
}

impl CensoredPartition {
    pub fn n_fc(&self) -> usize {
        self.fc.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Nc,
    Fc,
    Pc,
}

/// A usable row: its missingness pattern, kind, and for nc/pc rows the
/// positions (within the pattern) and scores of the exceeding stations.
#[derive(Debug, Clone)]
struct RowPlan {
    pattern: usize,
    kind: RowKind,
    exceed_pos: Vec<usize>,
    exceed_scores: Vec<f64>,
}

/// Scores of one neighborhood with everything needed to evaluate the
/// censored log-likelihood.
#[derive(Debug, Clone)]
pub struct LikelihoodProblem {
    n_rows: usize,
    /// Row-major N x D, NaN where missing.
    scores: Vec<f64>,
    coords: Vec<Coord>,
    center: Coord,
    thresholds: ThresholdSpec,
    family: Family,
    qmc: QmcConfig,
    weights: WeightSpec,
    partition: CensoredPartition,
    /// Distinct sets of non-missing columns among usable rows.
    patterns: Vec<Vec<usize>>,
    rows: Vec<RowPlan>,
}

impl LikelihoodProblem {
    /// `scores` is row-major with one column per entry of `coords`; columns
    /// should be ordered nearest-first from `center` for the weighted variant.
    pub fn new(
        scores: Vec<f64>,
        coords: Vec<Coord>,
        center: Coord,
        thresholds: ThresholdSpec,
        family: Family,
        qmc: QmcConfig,
        weights: WeightSpec,
    ) -> Result<Self> {
        let d = coords.len();
        if d == 0 || !scores.len().is_multiple_of(d) {
            return Err(Error::Data("score matrix does not match the sites".into()));
        }
        if thresholds.len() != d {
            return Err(Error::Config(format!(
                "{} thresholds for {d} stations",
                thresholds.len()
            )));
        }
        if let Some(u) = scores.iter().find(|u| !(u.is_nan() || (**u > 0.0 && **u < 1.0))) {
            return Err(Error::Data(format!("score {u} outside (0, 1)")));
        }
        if let WeightSpec::Biweight { bandwidth } = weights {
            let far = coords.iter().map(|c| c.distance(&center)).fold(0.0, f64::max);
            if !(bandwidth > far) {
                return Err(Error::Config(format!(
                    "bandwidth {bandwidth} must exceed the farthest neighbor distance {far}"
                )));
            }
        }
        let mut p = Self {
            n_rows: scores.len() / d,
            scores,
            coords,
            center,
            thresholds,
            family,
            qmc,
            weights,
            partition: CensoredPartition::default(),
            patterns: Vec::new(),
            rows: Vec::new(),
        };
        p.plan_rows();
        Ok(p)
    }

    fn plan_rows(&mut self) {
        let d = self.n_cols();
        let min_usable = d.min(2);
        let u_star = self.thresholds.values();
        let mut pattern_ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut part = CensoredPartition::default();
        let mut rows = Vec::new();
        for i in 0..self.n_rows {
            let row = &self.scores[i * d..(i + 1) * d];
            let cols: Vec<usize> = (0..d).filter(|&j| !row[j].is_nan()).collect();
            if cols.len() < min_usable {
                part.excluded.push(i);
                continue;
            }
            let exceed_pos: Vec<usize> = (0..cols.len()).filter(|&a| row[cols[a]] > u_star[cols[a]]).collect();
            let kind = if exceed_pos.len() == cols.len() {
                part.nc.push(i);
                RowKind::Nc
            } else if exceed_pos.is_empty() {
                part.fc.push(i);
                RowKind::Fc
            } else {
                part.pc.push(i);
                part.exceed.push(exceed_pos.iter().map(|&a| cols[a]).collect());
                RowKind::Pc
            };
            let exceed_scores = exceed_pos.iter().map(|&a| row[cols[a]]).collect();
            let next = pattern_ids.len();
            let pattern = *pattern_ids.entry(cols).or_insert(next);
            rows.push(RowPlan {
                pattern,
                kind,
                exceed_pos,
                exceed_scores,
            });
        }
        let mut patterns = vec![Vec::new(); pattern_ids.len()];
        for (cols, id) in pattern_ids {
            patterns[id] = cols;
        }
        self.partition = part;
        self.patterns = patterns;
        self.rows = rows;
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn center(&self) -> Coord {
        self.center
    }

    pub fn thresholds(&self) -> &ThresholdSpec {
        &self.thresholds
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn qmc(&self) -> &QmcConfig {
        &self.qmc
    }

    pub fn weights(&self) -> WeightSpec {
        self.weights
    }

    pub fn partition(&self) -> &CensoredPartition {
        &self.partition
    }

    /// Same data with another correlation family.
    pub fn with_family(&self, family: Family) -> Self {
        Self { family, ..self.clone() }
    }

    pub fn with_weights(&self, weights: WeightSpec) -> Result<Self> {
        Self::new(
            self.scores.clone(),
            self.coords.clone(),
            self.center,
            self.thresholds.clone(),
            self.family,
            self.qmc,
            weights,
        )
    }

    /// The problem restricted to the first `j` stations, re-partitioned.
    pub fn leading(&self, j: usize) -> Result<Self> {
        let d = self.n_cols();
        if j == 0 || j > d {
            return Err(Error::domain(format!("leading block size {j} outside 1..={d}")));
        }
        let scores = (0..self.n_rows)
            .flat_map(|i| self.scores[i * d..i * d + j].iter().copied())
            .collect();
        Self::new(
            scores,
            self.coords[..j].to_vec(),
            self.center,
            self.thresholds.leading(j),
            self.family,
            self.qmc,
            WeightSpec::Hard,
        )
    }

    /// Median of the positive pairwise distances, a natural range scale.
    pub fn typical_distance(&self) -> f64 {
        let mut dist: Vec<f64> = Vec::new();
        for i in 0..self.coords.len() {
            for j in 0..i {
                let h = self.coords[i].distance(&self.coords[j]);
                if h > 0.0 {
                    dist.push(h);
                }
            }
        }
        if dist.is_empty() {
            return 1.0;
        }
        dist.sort_by(f64::total_cmp);
        dist[dist.len() / 2]
    }
}

/// Index sets of the censored likelihood for `problem`.
pub fn partition_rows(problem: &LikelihoodProblem) -> CensoredPartition {
    problem.partition.clone()
}

fn invalid(msg: String) -> Error {
    Error::Numerical(format!("log-likelihood invalid: {msg}"))
}

/// Censored local log-likelihood. An `Err` is the invalid marker: a term
/// could not be evaluated at these parameters.
pub fn censored_loglik(params: &CopulaParams, problem: &LikelihoodProblem) -> Result<f64> {
    if problem.rows.is_empty() {
        return Ok(0.0);
    }
    let lambda = params.rate();
    let full = build_corr_matrix(&CorrelationModel::Stationary(*params.corr()), &problem.coords)?;
    let all: Vec<usize> = (0..problem.n_cols()).collect();
    let sigmas = problem
        .patterns
        .iter()
        .map(|cols| {
            if *cols == all {
                Ok(full.clone())
            } else {
                full.submatrix(cols)
            }
        })
        .collect::<Result<Vec<CorrelationMatrix>>>()?;
    let w_star = problem
        .thresholds
        .values()
        .iter()
        .map(|&u| marginal::quantile(u, lambda))
        .collect::<Result<Vec<f64>>>()?;
    let qmc = &problem.qmc;

    let mut fc_counts = vec![0usize; problem.patterns.len()];
    let mut total = 0.0;
    let mut w = Vec::with_capacity(problem.n_cols());
    for row in &problem.rows {
        let cols = &problem.patterns[row.pattern];
        match row.kind {
            RowKind::Fc => fc_counts[row.pattern] += 1,
            RowKind::Nc | RowKind::Pc => {
                w.clear();
                w.extend(cols.iter().map(|&j| w_star[j]));
                let mut margins = 0.0;
                for (&a, &u) in row.exceed_pos.iter().zip(&row.exceed_scores) {
                    let wa = marginal::quantile(u, lambda)?;
                    // scores above u* map above w*; max() guards rounding
                    w[a] = wa.max(w_star[cols[a]]);
                    margins += marginal::log_pdf(w[a], lambda);
                }
                let joint = if row.kind == RowKind::Nc {
                    joint_log_density(&w, lambda, &sigmas[row.pattern])?
                } else {
                    joint_cdf_partial(&w, &row.exceed_pos, lambda, &sigmas[row.pattern], qmc)?.log_value
                };
                total += joint - margins;
            }
        }
    }
    for (p, &count) in fc_counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let cols = &problem.patterns[p];
        w.clear();
        w.extend(cols.iter().map(|&j| w_star[j]));
        let f = joint_cdf(&w, lambda, &sigmas[p], qmc)?;
        if !(f.value > 0.0) {
            return Err(invalid(format!("censored probability {} at rate {lambda}", f.value)));
        }
        total += count as f64 * f.value.ln();
    }
    if !total.is_finite() {
        return Err(invalid(format!("non-finite total at rate {lambda}")));
    }
    Ok(total)
}

/// Weighted log-likelihood Σ_j ω_j {ℓ_j - ℓ_{j-1}} over the nested
/// neighborhoods of the first j stations, evaluated in the rearranged form
/// ω_D ℓ_D + Σ_{j<D} (ω_j - ω_{j+1}) ℓ_j so that terms with zero coefficient
/// are skipped. With hard weights this is exactly `censored_loglik`.
pub fn weighted_loglik(params: &CopulaParams, problem: &LikelihoodProblem) -> Result<f64> {
    let d = problem.n_cols();
    let omega: Vec<f64> = problem
        .coords
        .iter()
        .map(|c| problem.weights.weight(c.distance(&problem.center)))
        .collect();
    let mut total = 0.0;
    for j in (1..=d).rev() {
        let coef = if j == d { omega[d - 1] } else { omega[j - 1] - omega[j] };
        if coef == 0.0 {
            continue;
        }
        let ell = if j == d {
            censored_loglik(params, problem)?
        } else {
            censored_loglik(params, &problem.leading(j)?)?
        };
        total += coef * ell;
    }
    Ok(total)
}

/// The objective maximized by the local fit: weighted when the problem
/// carries biweight weights, plain otherwise.
pub fn objective(params: &CopulaParams, problem: &LikelihoodProblem) -> Result<f64> {
    match problem.weights {
        WeightSpec::Hard => censored_loglik(params, problem),
        WeightSpec::Biweight { .. } => weighted_loglik(params, problem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::StationaryCorr;
    use crate::gaussian::bvn::bvn_cdf;

    fn line(d: usize) -> Vec<Coord> {
        (0..d).map(|i| Coord::new(i as f64 * 0.5, 0.0)).collect()
    }

    fn problem(scores: Vec<f64>, d: usize, u: f64) -> LikelihoodProblem {
        LikelihoodProblem::new(
            scores,
            line(d),
            Coord::new(0.0, 0.0),
            ThresholdSpec::uniform(u, d).unwrap(),
            Family::Exponential,
            QmcConfig::default(),
            WeightSpec::Hard,
        )
        .unwrap()
    }

    fn params(l: f64, delta: f64) -> CopulaParams {
        CopulaParams::new(l, StationaryCorr::exponential(delta).unwrap()).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = problem(vec![0.9, 0.95, 0.1, 0.2, 0.9, 0.2, 0.3, f64::NAN], 2, 0.8);
        let part = partition_rows(&p);
        assert_eq!(part.nc, vec![0]);
        assert_eq!(part.fc, vec![1]);
        assert_eq!(part.pc, vec![2]);
        assert_eq!(part.exceed, vec![vec![0]]);
        assert_eq!(part.excluded, vec![3]);
    }

    #[test]
    fn single_column_nc_is_zero() {
        let p = problem(vec![0.9, 0.95, 0.99], 1, 0.8);
        assert_eq!(censored_loglik(&params(1.7, 1.0), &p).unwrap(), 0.0);
    }

    #[test]
    fn fully_censored_pair_matches_quadrature() {
        let (l, delta) = (1.5, 1.0);
        let p = problem(vec![0.3, 0.6], 2, 0.8);
        let got = censored_loglik(&params(l, delta), &p).unwrap();
        let ws = marginal::quantile(0.8, l).unwrap();
        let rho = (-0.5f64 / delta).exp();
        // λ ∫ Φ₂(w* - v, w* - v; ρ) e^{-λv} dv by Simpson's rule
        let (hi, n) = (40.0 / l, 40_000);
        let h = hi / n as f64;
        let f = |v: f64| l * (-l * v).exp() * bvn_cdf(ws - v, ws - v, rho);
        let mut acc = f(0.0) + f(hi);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        let oracle = (acc * h / 3.0).ln();
        assert!((got - oracle).abs() < 1e-5, "{got} vs {oracle}");
    }

    #[test]
    fn hard_weights_collapse_exactly() {
        let scores = vec![0.9, 0.85, 0.3, 0.1, 0.2, 0.95, 0.99, 0.7, 0.81, 0.5, 0.4, 0.3];
        let p = problem(scores, 3, 0.8);
        let th = params(2.0, 0.7);
        assert_eq!(weighted_loglik(&th, &p).unwrap(), censored_loglik(&th, &p).unwrap());
    }

    #[test]
    fn biweight_endpoints() {
        let w = WeightSpec::Biweight { bandwidth: 2.0 };
        assert_eq!(w.weight(0.0), 1.0);
        assert_eq!(w.weight(2.0), 0.0);
        assert_eq!(w.weight(3.0), 0.0);
        assert!((w.weight(1.0) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn weighted_telescoping_by_hand() {
        let scores = vec![0.9, 0.85, 0.3, 0.1, 0.2, 0.95, 0.99, 0.7, 0.81, 0.5, 0.4, 0.3];
        let w = WeightSpec::Biweight { bandwidth: 1.5 };
        let p = problem(scores, 3, 0.8).with_weights(w).unwrap();
        let th = params(2.0, 0.7);
        let ell: Vec<f64> = (1..=3)
            .map(|j| censored_loglik(&th, &p.leading(j).unwrap()).unwrap())
            .collect();
        let om: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&h| w.weight(h)).collect();
        let by_hand = om[0] * ell[0] + om[1] * (ell[1] - ell[0]) + om[2] * (ell[2] - ell[1]);
        let got = weighted_loglik(&th, &p).unwrap();
        assert!((got - by_hand).abs() < 1e-12, "{got} vs {by_hand}");
    }

    #[test]
    fn bandwidth_must_cover_neighbors() {
        let p = problem(vec![0.5; 6], 3, 0.8);
        assert!(p.with_weights(WeightSpec::Biweight { bandwidth: 1.0 }).is_err());
    }
}
