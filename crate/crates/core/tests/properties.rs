use proptest::prelude::*;
use robust_frontier::{
    empirical_optimize, normalize_frontier, EmpiricalDistribution, ExpUtilityModel, FeasibleSet, Frontier,
    FrontierMeta, FrontierMethod, FrontierPoint, NewsvendorModel, PhiDivergence, QuadraticModel, SolverOptions,
};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-3).then(|| w.into_iter().map(|v| v / s).collect())
    })
}

proptest! {
    #[test]
    fn divergence_is_nonnegative((q, p) in (1usize..8).prop_flat_map(|n| (simplex(n), simplex(n)))) {
        for phi in [PhiDivergence::relative_entropy(), PhiDivergence::modified_chi_square()] {
            match phi.divergence(&q, &p) {
                Ok(d) => prop_assert!(d >= -1e-15),
                Err(_) => prop_assert!(q.iter().zip(&p).any(|(a, b)| *b == 0.0 && *a > 0.0)),
            }
            prop_assert!(phi.divergence(&p, &p).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn sample_order_does_not_matter(ys in prop::collection::vec(0.0f64..60.0, 2..20), rot in 0usize..20) {
        let model = NewsvendorModel::new(30.0, 2.0, 0.5).unwrap();
        let a = EmpiricalDistribution::from_scalars(ys.clone()).unwrap();
        let mut shifted = ys.clone();
        shifted.rotate_left(rot % ys.len());
        shifted.reverse();
        let b = EmpiricalDistribution::from_scalars(shifted).unwrap();
        let xa = empirical_optimize(&model, &a, &SolverOptions::default()).unwrap()[0];
        let xb = empirical_optimize(&model, &b, &SolverOptions::default()).unwrap()[0];
        prop_assert!((xa - xb).abs() <= 1e-7 * (1.0 + xa.abs()));
    }

    #[test]
    fn toy_solution_is_weighted_mean(ys in prop::collection::vec(-10.0f64..10.0, 1..12), seed in any::<u64>()) {
        let n = ys.len();
        let raw: Vec<f64> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 1) >> 11) % 1000) as f64 + 1.0).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let mean: f64 = ys.iter().zip(&w).map(|(a, b)| a * b).sum();
        let dist = EmpiricalDistribution::weighted(ys.iter().map(|&y| vec![y]).collect(), w).unwrap();
        let x = empirical_optimize(&QuadraticModel::new(1), &dist, &SolverOptions::default()).unwrap()[0];
        prop_assert!((x - mean).abs() < 1e-8);
    }

    #[test]
    fn projection_is_feasible_and_nearest(
        v in prop::collection::vec(-3.0f64..3.0, 4),
        probes in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 20),
    ) {
        let set = FeasibleSet::box_budget(vec![-1.0; 4], vec![1.0; 4], 1.0).unwrap();
        let x = set.project(&v);
        prop_assert!(set.contains(&x, 1e-10));
        prop_assert_eq!(set.project(&x).iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-12), true);
        let dist = |y: &[f64]| y.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for probe in probes {
            let y = set.project(&probe);
            prop_assert!(dist(&x) <= dist(&y) + 1e-10);
        }
    }

    #[test]
    fn budget_portfolio_stays_feasible(r in prop::collection::vec(prop::collection::vec(-0.1f64..0.1, 3), 5..15)) {
        let model = ExpUtilityModel::budgeted(1.0, 3).unwrap();
        let dist = EmpiricalDistribution::uniform(r).unwrap();
        let x = empirical_optimize(&model, &dist, &SolverOptions::default()).unwrap();
        prop_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(x.iter().all(|v| v.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn csv_round_trip(raw in prop::collection::vec((any::<f64>(), any::<f64>(), 0.0f64..1e300, any::<f64>(), any::<f64>()), 1..10)) {
        let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
        let mut points: Vec<FrontierPoint<f64>> = raw
            .iter()
            .enumerate()
            .map(|(i, &(_, mu, s2, a, b))| FrontierPoint { delta: i as f64 * 0.1, mu: finite(mu), sigma2: s2, mu_sd: finite(a), sigma2_sd: finite(b) })
            .collect();
        points[0].delta = raw[0].0.abs().min(0.05);
        let f = Frontier::new(points, FrontierMeta::new(FrontierMethod::Bootstrap, 3, 4)).unwrap();
        let back = Frontier::<f64>::points_from_csv_str(&f.to_csv_string()).unwrap();
        for (p, q) in back.iter().zip(f.points()) {
            prop_assert_eq!(
                [p.delta, p.mu, p.sigma2, p.mu_sd, p.sigma2_sd].map(f64::to_bits),
                [q.delta, q.mu, q.sigma2, q.mu_sd, q.sigma2_sd].map(f64::to_bits)
            );
        }
    }

    #[test]
    fn normalize_is_idempotent(mus in prop::collection::vec(-100.0f64..100.0, 2..8), s2 in prop::collection::vec(0.0f64..100.0, 2..8)) {
        let n = mus.len().min(s2.len());
        let points: Vec<_> = (0..n)
            .map(|i| FrontierPoint { delta: i as f64, mu: mus[i], sigma2: s2[i], mu_sd: 1.0, sigma2_sd: 1.0 })
            .collect();
        let f = Frontier::new(points, FrontierMeta::new(FrontierMethod::Bootstrap, 2, 2)).unwrap();
        if let Ok(g) = normalize_frontier(&f) {
            let h = normalize_frontier(&g).unwrap();
            for (a, b) in g.points().iter().zip(h.points()) {
                prop_assert!((a.mu - b.mu).abs() < 1e-9 * (1.0 + a.mu.abs()));
                prop_assert!((a.sigma2 - b.sigma2).abs() < 1e-9 * (1.0 + a.sigma2.abs()));
            }
            let (first, last) = (g.points()[0], g.points()[n - 1]);
            prop_assert_eq!((first.mu, first.sigma2, last.mu, last.sigma2), (1.0, 1.0, 0.0, 0.0));
        }
    }
}
