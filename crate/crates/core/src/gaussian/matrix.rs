use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Off-diagonal magnitude at which a correlation counts as degenerate.
pub const NEAR_SINGULAR: f64 = 1.0 - 1e-10;
/// Diagonal jitter added to degenerate correlation matrices.
pub const JITTER: f64 = 1e-8;

/// Lower Cholesky factor, or a factorization error.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Factorization(format!(
            "matrix is {}x{}, not square",
            n,
            m.ncols()
        )));
    }
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Factorization(format!("{n}x{n} matrix is not positive definite")))
}

/// Solve L y = b for lower-triangular L.
pub fn forward_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = b.clone();
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s -= l[(i, j)] * y[j];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// log det of the matrix whose lower Cholesky factor is `l`.
pub fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Symmetric, unit-diagonal, positive-definite correlation matrix with its
/// lower Cholesky factor.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    chol: DMatrix<f64>,
    jittered: bool,
}

impl CorrelationMatrix {
    /// Validates and factorizes. Off-diagonal entries with |rho| >= 1 - 1e-10
    /// trigger a diagonal jitter of 1e-8 (renormalized back to unit diagonal);
    /// the `jittered` flag records it.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || n != entries.ncols() {
            return Err(Error::domain("correlation matrix must be square and non-empty"));
        }
        for i in 0..n {
            if !entries[(i, i)].is_finite() || (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "correlation matrix diagonal entry {i} is {}",
                    entries[(i, i)]
                )));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || (a - b).abs() > 1e-12 || a.abs() > 1.0 + 1e-12 {
                    return Err(Error::domain(format!(
                        "correlation entry ({i},{j}) = {a} invalid or asymmetric"
                    )));
                }
            }
        }
        let mut entries = entries;
        for i in 0..n {
            entries[(i, i)] = 1.0;
        }
        let degenerate = (0..n).any(|i| (0..i).any(|j| entries[(i, j)].abs() >= NEAR_SINGULAR));
        let mut jittered = false;
        if degenerate {
            jitter_in_place(&mut entries);
            jittered = true;
        }
        let chol = match cholesky(&entries) {
            Ok(c) => c,
            Err(e) if jittered => return Err(e),
            Err(_) => {
                jitter_in_place(&mut entries);
                jittered = true;
                cholesky(&entries)?
            }
        };
        if jittered {
            log::warn!("near-singular {n}x{n} correlation matrix jittered by {JITTER:e}");
        }
        Ok(Self {
            entries,
            chol,
            jittered,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            entries: DMatrix::identity(dim, dim),
            chol: DMatrix::identity(dim, dim),
            jittered: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn jittered(&self) -> bool {
        self.jittered
    }

    /// Principal sub-matrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> Result<Self> {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.entries[(idx[a], idx[b])]);
        let mut out = Self::new(sub)?;
        out.jittered |= self.jittered;
        Ok(out)
    }
}

/// Shrinks off-diagonals by 1/(1+jitter): identical to adding `jitter` to the
/// diagonal and rescaling to unit variances.
fn jitter_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let scale = 1.0 / (1.0 + JITTER);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m[(i, j)] *= scale;
            }
        }
    }
}

/// Multivariate normal distribution N(mean, cov).
#[derive(Debug, Clone)]
pub struct MvnSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl MvnSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if mean.len() != cov.nrows() {
            return Err(Error::domain(format!(
                "mean has length {} but covariance is {}x{}",
                mean.len(),
                cov.nrows(),
                cov.ncols()
            )));
        }
        let chol = cholesky(&cov)?;
        Ok(Self { mean, cov, chol })
    }

    /// Zero-mean normal with the given correlation matrix.
    pub fn standard(corr: &CorrelationMatrix) -> Self {
        Self {
            mean: DVector::zeros(corr.dim()),
            cov: corr.entries().clone(),
            chol: corr.cholesky_factor().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }
}

/// Log density of `spec` at `x`.
pub fn mvn_logpdf(spec: &MvnSpec, x: &[f64]) -> Result<f64> {
    let d = spec.dim();
    if x.len() != d {
        return Err(Error::domain(format!("point has length {} but dim is {d}", x.len())));
    }
    let centered = DVector::from_iterator(d, x.iter().zip(spec.mean.iter()).map(|(a, m)| a - m));
    let y = forward_solve(&spec.chol, &centered);
    let quad = y.norm_squared();
    Ok(-0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det_from_chol(&spec.chol) + quad))
}

/// Distribution of the remaining coordinates given `x[given_idx] = given_vals`,
/// via the Schur complement. Remaining coordinates keep their original order.
pub fn conditional_mvn(spec: &MvnSpec, given_idx: &[usize], given_vals: &[f64]) -> Result<MvnSpec> {
    let d = spec.dim();
    if given_idx.is_empty() || given_idx.len() >= d {
        return Err(Error::domain("conditioning set must be a non-empty proper subset"));
    }
    if given_idx.len() != given_vals.len() {
        return Err(Error::domain("conditioning indices and values differ in length"));
    }
    let mut is_given = vec![false; d];
    for &g in given_idx {
        if g >= d || is_given[g] {
            return Err(Error::domain(format!("bad or repeated conditioning index {g}")));
        }
        is_given[g] = true;
    }
    let rest: Vec<usize> = (0..d).filter(|i| !is_given[*i]).collect();
    let cov = &spec.cov;
    let s_gg = DMatrix::from_fn(given_idx.len(), given_idx.len(), |a, b| {
        cov[(given_idx[a], given_idx[b])]
    });
    let s_rg = DMatrix::from_fn(rest.len(), given_idx.len(), |a, b| cov[(rest[a], given_idx[b])]);
    let s_rr = DMatrix::from_fn(rest.len(), rest.len(), |a, b| cov[(rest[a], rest[b])]);
    let chol = s_gg
        .cholesky()
        .ok_or_else(|| Error::Factorization("conditioning block is singular".into()))?;
    let resid = DVector::from_iterator(
        given_idx.len(),
        given_idx.iter().zip(given_vals).map(|(&g, v)| v - spec.mean[g]),
    );
    // B = S_rg S_gg^{-1}
    let b = chol.solve(&s_rg.transpose()).transpose();
    let mean = DVector::from_iterator(rest.len(), rest.iter().map(|&r| spec.mean[r])) + &b * resid;
    let mut cond = s_rr - &b * s_rg.transpose();
    cond = (&cond + cond.transpose()) * 0.5;
    MvnSpec::new(mean, cond)
}
