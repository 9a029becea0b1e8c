//! Oracles shared by the integration tests. The factor integral is done
//! numerically here, so these are independent of the closed forms.
#![allow(dead_code)]

use fcopula::gaussian::{mvn_cdf, MvnSpec, QmcConfig};
use nalgebra::{DMatrix, DVector};
use quadrature::double_exponential::integrate;

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Φ₂(a, b; ρ) = ∫_{-∞}^a φ(x) Φ((b - ρx)/√(1-ρ²)) dx.
pub fn bvn_by_quadrature(a: f64, b: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let lo = a.min(-12.0) - 1.0;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() * std_normal_cdf((b - rho * x) / s);
    if a <= lo {
        return 0.0;
    }
    integrate(f, lo, a, 1e-14).integral
}

/// Φ₃(a, b, c; R) by conditioning on the first coordinate, with the
/// conditional bivariate term again by quadrature.
pub fn tvn_by_quadrature(b: &[f64], r: &DMatrix<f64>) -> f64 {
    let (r12, r13, r23) = (r[(0, 1)], r[(0, 2)], r[(1, 2)]);
    let (s2, s3) = ((1.0 - r12 * r12).sqrt(), (1.0 - r13 * r13).sqrt());
    let rho = (r23 - r12 * r13) / (s2 * s3);
    let lo = b[0].min(-12.0) - 1.0;
    if b[0] <= lo {
        return 0.0;
    }
    let f = |x: f64| {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
            * bvn_by_quadrature((b[1] - r12 * x) / s2, (b[2] - r13 * x) / s3, rho)
    };
    integrate(f, lo, b[0], 1e-13).integral
}

/// Gaussian orthant probability Φ_D(b; Σ). Closed form or nested
/// quadrature for D ≤ 3; beyond that a high-resolution run of the lattice
/// integrator.
pub fn gaussian_cdf(b: &[f64], sigma: &DMatrix<f64>) -> f64 {
    match b.len() {
        1 => std_normal_cdf(b[0]),
        2 => bvn_by_quadrature(b[0], b[1], sigma[(0, 1)]),
        3 => tvn_by_quadrature(b, sigma),
        d => {
            let spec = MvnSpec::new(DVector::zeros(d), sigma.clone()).unwrap();
            mvn_cdf(&spec, b, &QmcConfig::new(1 << 14, 16, 99)).unwrap().value
        }
    }
}

/// Dense Gaussian density φ_D(x; Σ) from an explicit inverse and determinant.
pub fn gaussian_pdf(x: &[f64], sigma: &DMatrix<f64>) -> f64 {
    let d = x.len();
    let inv = sigma.clone().try_inverse().unwrap();
    let x = DVector::from_column_slice(x);
    let q = (x.transpose() * inv * &x)[(0, 0)];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(d as i32) * sigma.determinant()).sqrt()
}

/// ∫₀^∞ g(w - v·1) λ e^{-λv} dv, with t = e^{-λv} mapping it to (0, 1].
/// The density integrand is peaked, so it is summed over `panels` equal
/// pieces of (0, 1].
fn over_factor(w: &[f64], lambda: f64, panels: usize, g: impl Fn(&[f64]) -> f64) -> f64 {
    let f = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let v = -t.ln() / lambda;
        let shifted: Vec<f64> = w.iter().map(|x| x - v).collect();
        g(&shifted)
    };
    let step = 1.0 / panels as f64;
    (0..panels)
        .map(|k| integrate(f, k as f64 * step, (k + 1) as f64 * step, 1e-14).integral)
        .sum()
}

/// Joint distribution function of Z + V·1 by quadrature over V.
pub fn factor_cdf(w: &[f64], lambda: f64, sigma: &DMatrix<f64>) -> f64 {
    over_factor(w, lambda, 1, |x| gaussian_cdf(x, sigma))
}

/// Joint density of Z + V·1 by quadrature over V.
pub fn factor_pdf(w: &[f64], lambda: f64, sigma: &DMatrix<f64>) -> f64 {
    over_factor(w, lambda, 16, |x| gaussian_pdf(x, sigma))
}

/// Exponential correlation matrix of `sites` at range `range`.
pub fn exp_corr(sites: &[(f64, f64)], range: f64) -> DMatrix<f64> {
    let d = sites.len();
    DMatrix::from_fn(d, d, |i, j| {
        let h = ((sites[i].0 - sites[j].0).powi(2) + (sites[i].1 - sites[j].1).powi(2)).sqrt();
        (-h / range).exp()
    })
}
