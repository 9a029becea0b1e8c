use fcopula::copula::{joint_cdf, marginal, CopulaParams};
use fcopula::correlation::{build_corr_matrix, CorrelationModel, Family, StationaryCorr};
use fcopula::data::{rank_transform, synthetic_times, ObservationPanel};
use fcopula::gaussian::QmcConfig;
use fcopula::geometry::Coord;
use fcopula::likelihood::{censored_loglik, partition_rows, LikelihoodProblem, ThresholdSpec, WeightSpec};
use proptest::prelude::*;

fn qmc() -> QmcConfig {
    QmcConfig::new(256, 4, 17)
}

fn sites(d: usize) -> Vec<Coord> {
    (0..d)
        .map(|j| Coord::new((j % 3) as f64 * 0.7, (j / 3) as f64 * 0.9))
        .collect()
}

fn problem(scores: Vec<f64>, d: usize, u_star: f64) -> LikelihoodProblem {
    LikelihoodProblem::new(
        scores,
        sites(d),
        Coord::new(0.0, 0.0),
        ThresholdSpec::uniform(u_star, d).unwrap(),
        Family::Exponential,
        qmc(),
        WeightSpec::Hard,
    )
    .unwrap()
}

fn params(lambda: f64, range: f64) -> CopulaParams {
    CopulaParams::new(lambda, StationaryCorr::exponential(range).unwrap()).unwrap()
}

/// Row-major scores with roughly 15% missing cells.
fn scores(d: usize, rows: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop::option::weighted(0.85, 0.01..0.99f64),
        rows.start * d..rows.end * d,
    )
    .prop_map(move |v| {
        let n = v.len() / d * d;
        v[..n].iter().map(|c| c.unwrap_or(f64::NAN)).collect()
    })
}

fn ranked_panel(raw: &[Option<f64>], d: usize) -> ObservationPanel {
    let n = raw.len() / d;
    let p = ObservationPanel::new(
        synthetic_times(n),
        (0..d).map(|j| format!("s{j}")).collect(),
        sites(d),
        raw[..n * d].to_vec(),
    )
    .unwrap();
    rank_transform(&p, 0).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_row_is_counted_once((d, s) in (1usize..=5).prop_flat_map(|d| (Just(d), scores(d, 1..60))), u in 0.1..0.95f64) {
        let n = s.len() / d;
        let p = problem(s, d, u);
        let part = partition_rows(&p);
        prop_assert_eq!(part.nc.len() + part.n_fc() + part.pc.len() + part.excluded.len(), n);
    }

    #[test]
    fn raising_thresholds_only_adds_censoring(s in scores(3, 5..60), lo in 0.1..0.9f64, dh in 0.0..0.09f64) {
        let a = partition_rows(&problem(s.clone(), 3, lo));
        let b = partition_rows(&problem(s.clone(), 3, lo + dh));
        prop_assert!(a.fc.iter().all(|i| b.fc.contains(i)));
        prop_assert!(b.nc.iter().all(|i| a.nc.contains(i)));
        // above every score each usable row is fully censored
        let top = partition_rows(&problem(s, 3, 0.995));
        prop_assert!(top.nc.is_empty() && top.pc.is_empty());
        prop_assert_eq!(top.excluded, a.excluded);
    }

    #[test]
    fn fully_censored_rows_share_one_term(s in scores(2, 5..40), lambda in 0.5..5.0f64, range in 0.3..3.0f64) {
        // complete rows only, thresholds above all scores: N log F(w*, w*)
        let full: Vec<f64> = s.chunks(2).filter(|r| !r[0].is_nan() && !r[1].is_nan()).flatten().copied().collect();
        let n = full.len() / 2;
        prop_assume!(n > 0);
        let u = 0.995;
        let ll = censored_loglik(&params(lambda, range), &problem(full, 2, u)).unwrap();
        let w = marginal::quantile(u, lambda).unwrap();
        let sigma = build_corr_matrix(&CorrelationModel::Stationary(StationaryCorr::exponential(range).unwrap()), &sites(2)).unwrap();
        let f = joint_cdf(&[w, w], lambda, &sigma, &qmc()).unwrap().value;
        prop_assert!((ll - n as f64 * f.ln()).abs() < 1e-9 * ll.abs().max(1.0), "{ll} vs {}", n as f64 * f.ln());
    }

    #[test]
    fn objective_ignores_increasing_transforms(
        raw in prop::collection::vec(prop::option::weighted(0.9, -3.0..3.0f64), 60..150),
        lambda in 0.5..5.0f64,
        range in 0.3..3.0f64,
    ) {
        let d = 3;
        let t: Vec<Option<f64>> = raw.iter().map(|v| v.map(|x| 10.0 * x.exp() - 4.0)).collect();
        let sa = ranked_panel(&raw, d).scores().unwrap().to_vec();
        let sb = ranked_panel(&t, d).scores().unwrap().to_vec();
        let p = params(lambda, range);
        let a = censored_loglik(&p, &problem(sa, d, 0.8)).unwrap();
        let b = censored_loglik(&p, &problem(sb, d, 0.8)).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn single_station_exceedances_cancel(s in prop::collection::vec(0.81..0.999f64, 1..80), lambda in 0.1..20.0f64) {
        let n = s.len();
        let ll = censored_loglik(&params(lambda, 1.0), &problem(s, 1, 0.8)).unwrap();
        prop_assert!(ll.abs() <= 1e-12 * n as f64, "{ll}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn batched_terms_equal_row_sums(s in scores(4, 5..40), u in 0.3..0.9f64, lambda in 0.5..5.0f64, range in 0.3..3.0f64) {
        let d = 4;
        let p = params(lambda, range);
        let whole = censored_loglik(&p, &problem(s.clone(), d, u)).unwrap();
        let mut by_row = 0.0;
        for row in s.chunks(d) {
            // a row with under two observed stations is excluded on its own too
            if row.iter().filter(|v| !v.is_nan()).count() >= 2 {
                by_row += censored_loglik(&p, &problem(row.to_vec(), d, u)).unwrap();
            }
        }
        prop_assert!((whole - by_row).abs() <= 1e-12 * whole.abs().max(1.0), "{whole} vs {by_row}");
    }
}
