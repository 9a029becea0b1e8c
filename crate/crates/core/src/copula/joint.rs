//! Joint density, distribution function and mixed partial derivatives of
//! W = Z + V·1 with Z ~ N_D(0, Σ) and V ~ Exp(λ).
//!
//! All three are closed forms in Gaussian quantities; no integral over the
//! factor is ever computed numerically. With a1 = wᵀΣ⁻¹w, a2 = 1ᵀΣ⁻¹w,
//! a3 = 1ᵀΣ⁻¹1 and a4 = (a2 - λ)/a3 the log density is
//!
//! log λ - (D-1)/2 log 2π - ½ log a3 - ½ log|Σ| + (a4² a3 - a1)/2 + log Φ(a4 √a3).
//!
//! The distribution function is Φ_D(w; Σ) - Σ_j exp(λ²/2 - λ w_j) Φ_D(b_j; Ω_j)
//! where, with σ = Σ_{-j,j}, the first D-1 limits are w_{-j} - w_j + λ(1 - σ),
//! the last is w_j - λ, and Ω_j has blocks Σ_{-j,-j} + 11ᵀ - 1σᵀ - σ1ᵀ,
//! σ - 1 and 1.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::matrix::{cholesky, forward_solve, log_det_from_chol};
use crate::gaussian::normal::{self, LN_SQRT_2PI};
use crate::gaussian::qmc::log_cdf_centered;
use crate::gaussian::{CorrelationMatrix, Estimate, LogEstimate, QmcConfig};

/// Largest exponent accepted for a single term of the distribution function.
const MAX_LOG_TERM: f64 = 700.0;

fn check_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("rate must be positive, got {lambda}")))
    }
}

fn check_dims(w: &[f64], sigma: &CorrelationMatrix) -> Result<()> {
    if w.len() != sigma.dim() || w.is_empty() {
        return Err(Error::domain(format!(
            "point has {} coordinates but the matrix is {}x{}",
            w.len(),
            sigma.dim(),
            sigma.dim()
        )));
    }
    if w.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("NaN coordinate"));
    }
    Ok(())
}

/// Log joint density of W at `w`.
pub fn joint_log_density(w: &[f64], lambda: f64, sigma: &CorrelationMatrix) -> Result<f64> {
    check_rate(lambda)?;
    check_dims(w, sigma)?;
    if w.iter().any(|x| x.is_infinite()) {
        return Ok(f64::NEG_INFINITY);
    }
    let l = sigma.cholesky_factor();
    let d = w.len();
    let y = forward_solve(l, &DVector::from_column_slice(w));
    let e = forward_solve(l, &DVector::from_element(d, 1.0));
    let (a1, a2, a3) = (y.dot(&y), e.dot(&y), e.dot(&e));
    Ok(lambda.ln() + gaussian_factor_log(d, a1, a2, a3, log_det_from_chol(l), lambda))
}

/// log C + log Φ(b4 √b3), the part shared by the density and the partials:
/// -(k-1)/2 log 2π - ½ log b3 - ½ log|Σ_k| + (b4² b3 - b1)/2 with the
/// Gaussian tail factor for r = 0 folded in.
fn gaussian_factor_log(k: usize, b1: f64, b2: f64, b3: f64, log_det: f64, lambda: f64) -> f64 {
    let b4 = (b2 - lambda) / b3;
    log_c(k, b1, b3, b4, log_det) + normal::log_cdf(b4 * b3.sqrt())
}

fn log_c(k: usize, b1: f64, b3: f64, b4: f64, log_det: f64) -> f64 {
    -((k as f64) - 1.0) * LN_SQRT_2PI - 0.5 * b3.ln() - 0.5 * log_det + 0.5 * (b4 * b4 * b3 - b1)
}

/// Joint distribution function of W at `w`.
///
/// Makes D + 1 calls to the multivariate normal integrator (D = number of
/// finite coordinates). Coordinates at +∞ are marginalized out exactly.
pub fn joint_cdf(w: &[f64], lambda: f64, sigma: &CorrelationMatrix, qmc: &QmcConfig) -> Result<Estimate> {
    check_rate(lambda)?;
    check_dims(w, sigma)?;
    if w.contains(&f64::NEG_INFINITY) {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i].is_finite()).collect();
    if keep.is_empty() {
        return Ok(Estimate { value: 1.0, error: 0.0 });
    }
    if keep.len() < w.len() {
        let sub = sigma.submatrix(&keep)?;
        let wk: Vec<f64> = keep.iter().map(|&i| w[i]).collect();
        return joint_cdf(&wk, lambda, &sub, qmc);
    }
    let d = w.len();
    let s = sigma.entries();
    let base = log_cdf_centered(s, w, qmc)?;
    let mut value = base.log_value.exp();
    let mut var = (value * base.rel_error).powi(2);
    let mut omega = DMatrix::zeros(d, d);
    let mut lim = vec![0.0; d];
    for j in 0..d {
        let log_pre = 0.5 * lambda * lambda - lambda * w[j];
        let term = if d == 1 {
            LogEstimate {
                log_value: normal::log_cdf(w[j] - lambda),
                rel_error: 0.0,
            }
        } else {
            let others: Vec<usize> = (0..d).filter(|&i| i != j).collect();
            for (a, &ia) in others.iter().enumerate() {
                let sa = s[(ia, j)];
                lim[a] = w[ia] - w[j] + lambda * (1.0 - sa);
                for (b, &ib) in others.iter().enumerate() {
                    let sb = s[(ib, j)];
                    omega[(a, b)] = s[(ia, ib)] + 1.0 - sa - sb;
                }
                omega[(a, d - 1)] = sa - 1.0;
                omega[(d - 1, a)] = sa - 1.0;
            }
            omega[(d - 1, d - 1)] = 1.0;
            lim[d - 1] = w[j] - lambda;
            log_cdf_centered(&omega, &lim, qmc)?
        };
        let log_term = log_pre + term.log_value;
        if log_term > MAX_LOG_TERM {
            return Err(Error::numerical(format!(
                "distribution function term overflows (log = {log_term:.1}) at rate {lambda}"
            )));
        }
        let t = log_term.exp();
        value -= t;
        var += (t * term.rel_error).powi(2);
    }
    if !value.is_finite() {
        return Err(Error::numerical("non-finite distribution function"));
    }
    Ok(Estimate {
        value: value.clamp(0.0, 1.0),
        error: var.sqrt(),
    })
}

/// Log of the mixed partial derivative ∂^{|J|} F / ∏_{j∈J} ∂w_j at `w`.
///
/// The coordinates in `j_set` are moved to the leading block; with
/// k = |J|, r = D - k, b1 = w_Jᵀ Σ_J⁻¹ w_J, b2 = 1ᵀ Σ_J⁻¹ w_J,
/// b3 = 1ᵀ Σ_J⁻¹ 1 and b4 = (b2 - λ)/b3 the result is
/// log λ + log C + log Φ_{r+1}([m - b4 c; b4]; Ω) where B = Σ_{RJ} Σ_J⁻¹,
/// m = w_R - B w_J, c = 1 - B 1 and Ω = [[Σ_{R|J} + ccᵀ/b3, -c/b3], [-cᵀ/b3, 1/b3]].
/// When J is every coordinate this is the log density.
pub fn joint_cdf_partial(
    w: &[f64],
    j_set: &[usize],
    lambda: f64,
    sigma: &CorrelationMatrix,
    qmc: &QmcConfig,
) -> Result<LogEstimate> {
    check_rate(lambda)?;
    check_dims(w, sigma)?;
    let d = w.len();
    let k = j_set.len();
    let mut in_j = vec![false; d];
    for &j in j_set {
        if j >= d || in_j[j] {
            return Err(Error::domain(format!("invalid or repeated index {j} in J")));
        }
        in_j[j] = true;
    }
    if k == 0 {
        return Err(Error::domain("J must be non-empty"));
    }
    if j_set.iter().any(|&j| !w[j].is_finite()) {
        return Ok(LogEstimate {
            log_value: f64::NEG_INFINITY,
            rel_error: 0.0,
        });
    }
    let rest: Vec<usize> = (0..d).filter(|&i| !in_j[i]).collect();
    let r = rest.len();
    let s = sigma.entries();

    let sk = DMatrix::from_fn(k, k, |a, b| s[(j_set[a], j_set[b])]);
    let natural = j_set.iter().enumerate().all(|(a, &j)| a == j);
    let lk = if k == d && natural {
        sigma.cholesky_factor().clone()
    } else {
        cholesky(&sk)?
    };
    let wk = DVector::from_fn(k, |a, _| w[j_set[a]]);
    let y = forward_solve(&lk, &wk);
    let e = forward_solve(&lk, &DVector::from_element(k, 1.0));
    let (b1, b2, b3) = (y.dot(&y), e.dot(&y), e.dot(&e));
    let log_det = log_det_from_chol(&lk);
    if r == 0 {
        return Ok(LogEstimate {
            log_value: lambda.ln() + gaussian_factor_log(k, b1, b2, b3, log_det, lambda),
            rel_error: 0.0,
        });
    }
    let b4 = (b2 - lambda) / b3;
    let lc = log_c(k, b1, b3, b4, log_det);

    // B = Σ_RJ Σ_J⁻¹ through the factor: X = L⁻¹ Σ_JR, Bᵀ = L⁻ᵀ X.
    let skr = DMatrix::from_fn(k, r, |a, b| s[(j_set[a], rest[b])]);
    let x = lk
        .solve_lower_triangular(&skr)
        .ok_or_else(|| Error::Factorization("singular leading block".into()))?;
    let bt = lk
        .transpose()
        .solve_upper_triangular(&x)
        .ok_or_else(|| Error::Factorization("singular leading block".into()))?;
    // Σ_R|J = Σ_R - Xᵀ X
    let cond = DMatrix::from_fn(r, r, |a, b| s[(rest[a], rest[b])]) - x.transpose() * &x;
    let mut omega = DMatrix::zeros(r + 1, r + 1);
    let mut lim = vec![0.0; r + 1];
    let c: Vec<f64> = (0..r).map(|a| 1.0 - bt.column(a).sum()).collect();
    for a in 0..r {
        let m = w[rest[a]] - bt.column(a).dot(&wk);
        lim[a] = m - b4 * c[a];
        for b in 0..r {
            omega[(a, b)] = cond[(a, b)] + c[a] * c[b] / b3;
        }
        omega[(a, r)] = -c[a] / b3;
        omega[(r, a)] = -c[a] / b3;
    }
    omega[(r, r)] = 1.0 / b3;
    lim[r] = b4;
    let p = log_cdf_centered(&omega, &lim, qmc)?;
    let log_value = lambda.ln() + lc + p.log_value;
    if log_value.is_nan() {
        return Err(Error::numerical("NaN partial derivative"));
    }
    Ok(LogEstimate {
        log_value,
        rel_error: p.rel_error,
    })
}
