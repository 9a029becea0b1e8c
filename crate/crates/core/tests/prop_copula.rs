use fcopula::copula::{chi_limit, joint_cdf, joint_cdf_partial, joint_log_density, marginal, CopulaParams};
use fcopula::correlation::{build_corr_matrix, CorrelationModel, StationaryCorr};
use fcopula::gaussian::{CorrelationMatrix, QmcConfig};
use fcopula::geometry::Coord;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn pair_matrix(rho: f64) -> CorrelationMatrix {
    CorrelationMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
}

fn site_matrix(xy: &[(f64, f64)], range: f64) -> CorrelationMatrix {
    let sites: Vec<Coord> = xy.iter().map(|&(x, y)| Coord::new(x, y)).collect();
    let model = CorrelationModel::Stationary(StationaryCorr::exponential(range).unwrap());
    build_corr_matrix(&model, &sites).unwrap()
}

fn site_list(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..3.0f64, 0.0..3.0f64), n)
}

fn permuted(m: &CorrelationMatrix, perm: &[usize]) -> CorrelationMatrix {
    let d = perm.len();
    CorrelationMatrix::new(DMatrix::from_fn(d, d, |i, j| m.get(perm[i], perm[j]))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bivariate_copula_is_two_increasing(
        lambda in 0.5..5.0f64,
        rho in 0.0..0.95f64,
        u1 in 0.01..0.9f64, du1 in 0.01..0.09f64,
        u2 in 0.01..0.9f64, du2 in 0.01..0.09f64,
    ) {
        let sigma = pair_matrix(rho);
        let qmc = QmcConfig::default();
        let z = |u: f64| marginal::quantile(u, lambda).unwrap();
        let c = |a: f64, b: f64| joint_cdf(&[z(a), z(b)], lambda, &sigma, &qmc).unwrap();
        let (a0, a1, b0, b1) = (u1, u1 + du1, u2, u2 + du2);
        let (c00, c01, c10, c11) = (c(a0, b0), c(a0, b1), c(a1, b0), c(a1, b1));
        let tol = 3.0 * (c00.error + c01.error + c10.error + c11.error) + 1e-12;
        prop_assert!(c01.value >= c00.value - tol && c10.value >= c00.value - tol);
        prop_assert!(c11.value >= c01.value - tol && c11.value >= c10.value - tol);
        prop_assert!(c11.value - c01.value - c10.value + c00.value >= -tol);
    }

    #[test]
    fn far_coordinate_marginalizes(
        lambda in 0.5..5.0f64,
        range in 0.2..3.0f64,
        xy in site_list(5),
        w in prop::collection::vec(-1.0..3.0f64, 5),
        d in 3usize..=5,
        drop in 0usize..5,
    ) {
        let sigma = site_matrix(&xy[..d], range);
        let j = drop % d;
        let qmc = QmcConfig::default();
        let mut full = w[..d].to_vec();
        full[j] = 40.0 + lambda;
        let keep: Vec<usize> = (0..d).filter(|&i| i != j).collect();
        let sub_w: Vec<f64> = keep.iter().map(|&i| w[i]).collect();
        let a = joint_cdf(&full, lambda, &sigma, &qmc).unwrap();
        let b = joint_cdf(&sub_w, lambda, &sigma.submatrix(&keep).unwrap(), &qmc).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-4, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn permuting_coordinates_is_harmless(
        lambda in 0.5..5.0f64,
        range in 0.2..3.0f64,
        xy in site_list(4),
        w in prop::collection::vec(-1.0..3.0f64, 4),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let sigma = site_matrix(&xy, range);
        let ps = permuted(&sigma, &perm);
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let qmc = QmcConfig::default();
        let a = joint_cdf(&w, lambda, &sigma, &qmc).unwrap();
        let b = joint_cdf(&pw, lambda, &ps, &qmc).unwrap();
        prop_assert!((a.value - b.value).abs() <= 3.0 * (a.error + b.error) + 1e-12,
            "{} vs {} (errors {}, {})", a.value, b.value, a.error, b.error);
        let da = joint_log_density(&w, lambda, &sigma).unwrap();
        let db = joint_log_density(&pw, lambda, &ps).unwrap();
        prop_assert!((da - db).abs() < 1e-10 * da.abs().max(1.0));
    }

    #[test]
    fn limit_decreases_in_rate(range in 0.1..5.0f64, h in 0.01..5.0f64) {
        let chi = |lambda: f64| {
            chi_limit(&CopulaParams::new(lambda, StationaryCorr::exponential(range).unwrap()).unwrap(), h).unwrap()
        };
        let v: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&l| chi(l)).collect();
        prop_assert!(v.windows(2).all(|p| p[1] < p[0]), "{v:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn derivative_matches_partial(
        lambda in 0.5..5.0f64,
        range in 0.2..3.0f64,
        xy in site_list(5),
        w in prop::collection::vec(-0.5..2.5f64, 5),
        d in prop_oneof![Just(2usize), Just(3), Just(5)],
        j in 0usize..5,
    ) {
        let sigma = site_matrix(&xy[..d], range);
        let j = j % d;
        let qmc = QmcConfig::new(20_000, 8, 3);
        let step = 1e-3;
        let at = |dx: f64| {
            let mut v = w[..d].to_vec();
            v[j] += dx;
            joint_cdf(&v, lambda, &sigma, &qmc).unwrap().value
        };
        let fd = (at(step) - at(-step)) / (2.0 * step);
        let exact = joint_cdf_partial(&w[..d], &[j], lambda, &sigma, &qmc).unwrap().log_value.exp();
        prop_assert!((fd - exact).abs() < 1e-4, "fd {fd} vs {exact}");
    }
}
