use fcopula::copula::{chi_limit_pair, chi_limit_rho, marginal, CopulaParams};
use fcopula::correlation::{NonstationaryCorr, ScalarField, StationaryCorr};
use fcopula::geometry::{BBox, Coord};
use fcopula::simulate::{make_scenario, simulate_nonstationary, simulate_stationary, Scenario, ScenarioLabel};
use proptest::prelude::*;

fn column(values: &[f64], d: usize, j: usize) -> Vec<f64> {
    values.iter().skip(j).step_by(d).copied().collect()
}

/// One-sample Kolmogorov–Smirnov distance against `cdf`.
fn ks_one(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic.
fn ks_two(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail probability P(K > t).
fn kolmogorov_sf(t: f64) -> f64 {
    let s: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * k * k * t * t).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Empirical χ(u) of two columns of W, thresholding at each site's own
/// marginal quantile, with its binomial standard error.
fn empirical_chi(w1: &[f64], w2: &[f64], q1: f64, q2: f64) -> (f64, f64) {
    let den = w2.iter().filter(|&&v| v > q2).count() as f64;
    let num = w1.iter().zip(w2).filter(|(a, b)| **a > q1 && **b > q2).count() as f64;
    let chi = num / den;
    (chi, (chi * (1.0 - chi) / den).sqrt())
}

fn pair() -> [Coord; 2] {
    [Coord::new(0.0, 0.0), Coord::new(1.0, 0.0)]
}

#[test]
fn gaussian_limit_correlation() {
    let p = CopulaParams::new(1e3, StationaryCorr::exponential(1.5).unwrap()).unwrap();
    let sim = simulate_stationary(&p, &pair(), 100_000, 1).unwrap();
    let r = pearson(&column(&sim.values, 2, 0), &column(&sim.values, 2, 1));
    let rho = (-1.0f64 / 1.5).exp();
    assert!((r - rho).abs() < 0.02, "{r} vs {rho}");
}

#[test]
fn margins_follow_the_marginal_cdf() {
    let p = CopulaParams::new(2.0, StationaryCorr::exponential(1.0).unwrap()).unwrap();
    let sites = [Coord::new(0.0, 0.0), Coord::new(1.0, 0.0), Coord::new(0.0, 2.0)];
    let sim = simulate_stationary(&p, &sites, 100_000, 2).unwrap();
    for j in 0..3 {
        let d = ks_one(column(&sim.values, 3, j), |w| marginal::cdf(w, 2.0));
        assert!(d < 0.01, "site {j}: KS {d}");
    }
}

#[test]
fn scores_are_uniform_per_margin() {
    let p = CopulaParams::new(1.5, StationaryCorr::matern(1.0, 1.5).unwrap()).unwrap();
    let sites = BBox::new(0.0, 0.0, 2.0, 2.0).unwrap().lattice(2, 2);
    let n = 5000;
    let sim = simulate_stationary(&p, &sites, n, 3).unwrap();
    let scores = sim.scores();
    for j in 0..4 {
        let d = ks_one(column(&scores, 4, j), |u| u);
        assert!(d < 1.36 / (n as f64).sqrt(), "site {j}: KS {d}");
    }
}

#[test]
fn chi_at_high_level_matches_the_limit() {
    // λ = 2 and ρ = 0.5 give the limit 2{1 - Φ(1)}
    let rho: f64 = 0.5;
    let p = CopulaParams::new(2.0, StationaryCorr::exponential(-1.0 / rho.ln()).unwrap()).unwrap();
    let limit = chi_limit_rho(2.0, rho);
    assert!((limit - 0.317_310_507_862_914).abs() < 1e-12);
    let sim = simulate_stationary(&p, &pair(), 10_000_000, 4).unwrap();
    let q = marginal::quantile(0.999, 2.0).unwrap();
    let (chi, se) = empirical_chi(&column(&sim.values, 2, 0), &column(&sim.values, 2, 1), q, q);
    assert!((chi - limit).abs() < 3.0 * se, "{chi} ± {se} vs {limit}");
}

#[test]
fn constant_fields_match_the_stationary_simulator() {
    let (rate, range, nu) = (1.7, 0.8, 1.5);
    let scenario = Scenario {
        label: ScenarioLabel::Custom,
        rate: ScalarField::Constant(rate),
        range: ScalarField::Constant(range),
        nu,
    };
    let sites = [Coord::new(0.0, 0.0), Coord::new(0.6, 0.3)];
    let n = 100_000;
    let a = simulate_nonstationary(&scenario, &sites, n, 5).unwrap();
    let p = CopulaParams::new(rate, StationaryCorr::matern(range, nu).unwrap()).unwrap();
    let b = simulate_stationary(&p, &sites, n, 6).unwrap();
    for j in 0..2 {
        let d = ks_two(column(&a.values, 2, j), column(&b.values, 2, j));
        let pval = kolmogorov_sf(d * (n as f64 / 2.0).sqrt());
        assert!(pval >= 0.01, "site {j}: KS {d}, p = {pval}");
    }
    // and the dependence agrees: the difference of the two sites
    let diff = |s: &[f64]| s.chunks(2).map(|r| r[0] - r[1]).collect::<Vec<f64>>();
    let d = ks_two(diff(&a.values), diff(&b.values));
    assert!(kolmogorov_sf(d * (n as f64 / 2.0).sqrt()) >= 0.01, "difference KS {d}");
}

#[test]
fn nonstationary_pair_chi_matches_closed_form() {
    let bbox = BBox::new(1.0, 1.0, 10.0, 10.0).unwrap();
    let scenario = make_scenario(ScenarioLabel::Strong, &bbox, 2.5).unwrap();
    let sites = [Coord::new(3.0, 5.0), Coord::new(4.0, 5.0)];
    let (l1, l2) = (
        scenario.rate.eval_positive(&sites[0]).unwrap(),
        scenario.rate.eval_positive(&sites[1]).unwrap(),
    );
    assert!((l1 - l2).abs() > 0.2, "the two rates should differ");
    let rho = NonstationaryCorr::new(2.5, scenario.range.clone())
        .unwrap()
        .corr(&sites[0], &sites[1])
        .unwrap();
    let limit = chi_limit_pair(l1, l2, rho);
    let gamma = l1 * l1 - 2.0 * rho * l1 * l2 + l2 * l2;
    let by_hand = 2.0 * (1.0 - fcopula::gaussian::std_normal_cdf(gamma.sqrt() / 2.0));
    assert!((limit - by_hand).abs() < 1e-12);
    let sim = simulate_nonstationary(&scenario, &sites, 10_000_000, 7).unwrap();
    let q1 = marginal::quantile(0.999, l1).unwrap();
    let q2 = marginal::quantile(0.999, l2).unwrap();
    let (chi, se) = empirical_chi(&column(&sim.values, 2, 0), &column(&sim.values, 2, 1), q1, q2);
    assert!((chi - limit).abs() < 3.0 * se, "{chi} ± {se} vs {limit}");
}

#[test]
fn simulation_study_shape() {
    let bbox = BBox::new(1.0, 1.0, 10.0, 10.0).unwrap();
    let scenario = make_scenario(ScenarioLabel::Mild, &bbox, 2.5).unwrap();
    let sites = bbox.lattice(25, 25);
    let sim = simulate_nonstationary(&scenario, &sites, 500, 8).unwrap();
    let panel = sim.to_panel().unwrap();
    assert_eq!((panel.n_rows(), panel.n_cols()), (500, 625));
    assert!(sim.values.iter().all(|v| v.is_finite()));
}

#[test]
fn seeds_are_reproducible_and_unrelated() {
    let p = CopulaParams::new(2.0, StationaryCorr::exponential(1.0).unwrap()).unwrap();
    let a = simulate_stationary(&p, &pair(), 20_000, 9).unwrap();
    assert_eq!(a, simulate_stationary(&p, &pair(), 20_000, 9).unwrap());
    let b = simulate_stationary(&p, &pair(), 20_000, 10).unwrap();
    let r = pearson(&column(&a.values, 2, 0), &column(&b.values, 2, 0));
    assert!(r.abs() < 4.0 / (20_000f64).sqrt(), "cross-seed correlation {r}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn factor_cancels_in_differences(lambda in 0.3..10.0f64, range in 0.2..3.0f64, h in 0.1..3.0f64, seed in any::<u64>()) {
        let p = CopulaParams::new(lambda, StationaryCorr::exponential(range).unwrap()).unwrap();
        let sites = [Coord::new(0.0, 0.0), Coord::new(h, 0.0)];
        let sim = simulate_stationary(&p, &sites, 100_000, seed).unwrap();
        let diff: Vec<f64> = sim.values.chunks(2).map(|r| r[0] - r[1]).collect();
        let n = diff.len() as f64;
        let m = diff.iter().sum::<f64>() / n;
        let var = diff.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1.0);
        let want = 2.0 * (1.0 - p.rho(h).unwrap());
        prop_assert!((var / want - 1.0).abs() < 0.02, "{var} vs {want}");
    }
}
