//! Multivariate normal orthant probabilities by separation of variables
//! (Genz 1992) with randomized quasi-Monte-Carlo.
//!
//! Points come from a Richtmyer (square roots of primes) rank-1 lattice,
//! periodized with the tent transform, used antithetically and randomized by
//! `shifts` independent uniform shifts drawn from the configured seed. The
//! returned error is the standard error across shifts. Variables are
//! reordered (Genz–Bretz prioritization) so that the most restrictive limit
//! is integrated first; that factor is carried in log space, which keeps the
//! result usable when the probability underflows.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bvn::bvn_cdf;
use super::matrix::MvnSpec;
use super::normal;
use crate::error::{Error, Result};

/// Largest dimension accepted by the integrator.
pub const MAX_DIM: usize = 40;

const PRIMES: [u32; MAX_DIM] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173,
];

/// Sample sizes and seed of the randomized QMC rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QmcConfig {
    /// Lattice points per randomization (rounded up to even for antithetics).
    pub points: usize,
    /// Number of independent random shifts.
    pub shifts: usize,
    pub seed: u64,
}

impl QmcConfig {
    pub fn new(points: usize, shifts: usize, seed: u64) -> Self {
        Self { points, shifts, seed }
    }

    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self {
            points: 10_000,
            shifts: 8,
            seed: 0x5eed,
        }
    }
}

/// Probability with its standard-error proxy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Log probability with the relative standard error of the probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEstimate {
    pub log_value: f64,
    pub rel_error: f64,
}

impl LogEstimate {
    pub fn to_estimate(self) -> Estimate {
        let value = self.log_value.exp();
        Estimate {
            value,
            error: value * self.rel_error,
        }
    }
}

/// P(X <= upper) for X ~ spec.
pub fn mvn_cdf(spec: &MvnSpec, upper: &[f64], qmc: &QmcConfig) -> Result<Estimate> {
    let est = mvn_log_cdf(spec, upper, qmc)?.to_estimate();
    Ok(Estimate {
        value: est.value.clamp(0.0, 1.0),
        error: est.error,
    })
}

/// log P(X <= upper) for X ~ spec.
pub fn mvn_log_cdf(spec: &MvnSpec, upper: &[f64], qmc: &QmcConfig) -> Result<LogEstimate> {
    if upper.len() != spec.dim() {
        return Err(Error::domain(format!(
            "upper limits have length {} but dim is {}",
            upper.len(),
            spec.dim()
        )));
    }
    let b: Vec<f64> = upper.iter().zip(spec.mean().iter()).map(|(u, m)| u - m).collect();
    log_cdf_centered(spec.cov(), &b, qmc)
}

/// log P(X <= b) for X ~ N(0, cov).
pub fn log_cdf_centered(cov: &DMatrix<f64>, b: &[f64], qmc: &QmcConfig) -> Result<LogEstimate> {
    if b.iter().any(|x| x.is_nan()) {
        return Err(Error::numerical("NaN integration limit"));
    }
    if b.contains(&f64::NEG_INFINITY) {
        return Ok(LogEstimate {
            log_value: f64::NEG_INFINITY,
            rel_error: 0.0,
        });
    }
    // +inf limits integrate out.
    let keep: Vec<usize> = (0..b.len()).filter(|&i| b[i] != f64::INFINITY).collect();
    let m = keep.len();
    if m > MAX_DIM {
        return Err(Error::domain(format!("dimension {m} exceeds {MAX_DIM}")));
    }
    let exact = |log_value: f64| LogEstimate {
        log_value,
        rel_error: 0.0,
    };
    match m {
        0 => return Ok(exact(0.0)),
        1 => {
            let s = cov[(keep[0], keep[0])];
            if !(s > 0.0) {
                return Err(Error::Factorization("non-positive variance".into()));
            }
            return Ok(exact(normal::log_cdf(b[keep[0]] / s.sqrt())));
        }
        2 => {
            let (i, j) = (keep[0], keep[1]);
            let (si, sj) = (cov[(i, i)], cov[(j, j)]);
            if !(si > 0.0 && sj > 0.0) {
                return Err(Error::Factorization("non-positive variance".into()));
            }
            let (si, sj) = (si.sqrt(), sj.sqrt());
            let r = cov[(i, j)] / (si * sj);
            if !(r.abs() < 1.0) && (r.abs() - 1.0) > 1e-12 {
                return Err(Error::Factorization(format!("bivariate correlation {r}")));
            }
            let p = bvn_cdf(b[i] / si, b[j] / sj, r.clamp(-1.0, 1.0));
            if p > 1e-250 {
                return Ok(exact(p.ln()));
            }
            // deep tail: fall through to the log-space integrator
        }
        _ => {}
    }
    let sub = DMatrix::from_fn(m, m, |a, c| cov[(keep[a], keep[c])]);
    let lim: Vec<f64> = keep.iter().map(|&i| b[i]).collect();
    let plan = SovPlan::new(&sub, &lim)?;
    Ok(plan.integrate(qmc))
}

/// Reordered Cholesky factor and scaled limits for the SOV integrand.
struct SovPlan {
    m: usize,
    /// Limits already divided by the diagonal of the factor.
    lim: Vec<f64>,
    /// Off-diagonal factor entries scaled by the row's diagonal.
    lscaled: Vec<f64>,
    log_e1: f64,
    e1: f64,
}

impl SovPlan {
    fn new(cov: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        let m = b.len();
        let mut c = cov.clone();
        let mut b = b.to_vec();
        let mut l = vec![0.0; m * m];
        let mut y = vec![0.0; m];
        for i in 0..m {
            // pick the remaining variable with the smallest conditional probability
            let mut best = i;
            let mut best_lp = f64::INFINITY;
            for j in i..m {
                let mut s = c[(j, j)];
                let mut mu = 0.0;
                for k in 0..i {
                    s -= l[j * m + k] * l[j * m + k];
                    mu += l[j * m + k] * y[k];
                }
                if s <= 1e-14 * c[(j, j)].max(1e-300) {
                    continue;
                }
                let lp = normal::log_cdf((b[j] - mu) / s.sqrt());
                if lp < best_lp {
                    best_lp = lp;
                    best = j;
                }
            }
            if best_lp == f64::INFINITY {
                return Err(Error::Factorization(format!(
                    "{m}x{m} covariance is singular at pivot {i}"
                )));
            }
            if best != i {
                c.swap_rows(i, best);
                c.swap_columns(i, best);
                b.swap(i, best);
                for k in 0..i {
                    l.swap(i * m + k, best * m + k);
                }
            }
            let mut s = c[(i, i)];
            for k in 0..i {
                s -= l[i * m + k] * l[i * m + k];
            }
            let d = s.sqrt();
            l[i * m + i] = d;
            for r in (i + 1)..m {
                let mut v = c[(r, i)];
                for k in 0..i {
                    v -= l[r * m + k] * l[i * m + k];
                }
                l[r * m + i] = v / d;
            }
            let mut mu = 0.0;
            for k in 0..i {
                mu += l[i * m + k] * y[k];
            }
            y[i] = normal::truncated_mean_below((b[i] - mu) / d);
        }
        let lim: Vec<f64> = (0..m).map(|i| b[i] / l[i * m + i]).collect();
        let mut lscaled = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..i {
                lscaled[i * m + k] = l[i * m + k] / l[i * m + i];
            }
        }
        let log_e1 = normal::log_cdf(lim[0]);
        Ok(Self {
            m,
            lim,
            lscaled,
            log_e1,
            e1: log_e1.exp(),
        })
    }

    /// Product of the conditional probabilities after the first, at one point.
    fn integrand(&self, x: &[f64], y: &mut [f64]) -> f64 {
        let m = self.m;
        y[0] = if self.e1 > 1e-300 {
            normal::quantile(x[0] * self.e1)
        } else {
            normal::quantile_from_log(x[0].ln() + self.log_e1)
        };
        let mut f = 1.0;
        for i in 1..m {
            let row = &self.lscaled[i * m..i * m + i];
            let mut shift = 0.0;
            for k in 0..i {
                shift += row[k] * y[k];
            }
            let e = normal::cdf(self.lim[i] - shift);
            f *= e;
            if f == 0.0 {
                return 0.0;
            }
            if i + 1 < m {
                let p = x[i] * e;
                y[i] = if p > 1e-300 {
                    normal::quantile(p)
                } else {
                    normal::quantile_from_log(x[i].ln() + normal::log_cdf(self.lim[i] - shift))
                };
            }
        }
        f
    }

    fn integrate(&self, qmc: &QmcConfig) -> LogEstimate {
        let m = self.m;
        let nd = m - 1;
        let alpha: Vec<f64> = PRIMES[..nd].iter().map(|&p| (p as f64).sqrt().fract()).collect();
        let half = qmc.points.max(2).div_ceil(2);
        let shifts = qmc.shifts.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(qmc.seed);
        let mut means = Vec::with_capacity(shifts);
        let mut x = vec![0.0; nd];
        let mut xa = vec![0.0; nd];
        let mut y = vec![0.0; m];
        let lo = f64::EPSILON;
        let hi = 1.0 - f64::EPSILON;
        for _ in 0..shifts {
            let delta: Vec<f64> = (0..nd).map(|_| rng.random::<f64>()).collect();
            let mut acc = 0.0;
            for n in 1..=half {
                for k in 0..nd {
                    let u = (n as f64 * alpha[k] + delta[k]).fract();
                    let t = (2.0 * u - 1.0).abs();
                    x[k] = t.clamp(lo, hi);
                    xa[k] = (1.0 - t).clamp(lo, hi);
                }
                acc += self.integrand(&x, &mut y) + self.integrand(&xa, &mut y);
            }
            means.push(acc / (2 * half) as f64);
        }
        let s = shifts as f64;
        let mean = means.iter().sum::<f64>() / s;
        let var = if shifts > 1 {
            means.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s * (s - 1.0))
        } else {
            0.0
        };
        let rel_error = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        LogEstimate {
            log_value: self.log_e1 + mean.ln(),
            rel_error,
        }
    }
}
