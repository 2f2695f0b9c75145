use precistab::estimators::{cov_data_lipschitz_check, eig_perturbation_check, sample_cov, SampleSet};
use precistab::lab::{sample, stream, DistributionSpec, Role};
use precistab::portfolio::{feasible_interval, membership_admissible, solve_markowitz, value_v, PortfolioProblem};
use precistab::precision::{solve_default, PrecisionProblem};
use precistab::transport::{
    fm2_upper, fm_lower_dictionary, w1_assignment, w1_sorted_1d, EmpiricalMeasure, GroundMetric,
};
use precistab::SymMatrix;
use proptest::prelude::*;

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-3.0f64..3.0, n * n).prop_map(move |v| SymMatrix::from_fn(n, |i, j| v[i * n + j] + v[j * n + i]))
}

fn psd(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |a| {
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum::<f64>() / n as f64)
    })
}

fn sized_sym() -> impl Strategy<Value = (SymMatrix, SymMatrix)> {
    (1usize..7).prop_flat_map(|n| (sym(n), sym(n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symmatrix_json_round_trip(m in (1usize..6).prop_flat_map(sym)) {
        let text = serde_json::to_string(&m).unwrap();
        let back: SymMatrix = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn eigenvalues_move_less_than_frobenius((a, b) in sized_sym()) {
        let c = eig_perturbation_check(&a, &b).unwrap();
        prop_assert!(c.holds(1e-10 * (1.0 + c.rhs)), "{:?}", c);
    }

    #[test]
    fn covariance_is_data_lipschitz(
        (n, a, b) in (1usize..5, 2usize..20).prop_flat_map(|(n, rows)| {
            (Just(n), prop::collection::vec(-4.0f64..4.0, n * rows), prop::collection::vec(-4.0f64..4.0, n * rows))
        })
    ) {
        let c = cov_data_lipschitz_check(&SampleSet::new(n, a).unwrap(), &SampleSet::new(n, b).unwrap()).unwrap();
        prop_assert!(c.holds(1e-12 * (1.0 + c.rhs)), "{:?}", c);
    }

    #[test]
    fn assignment_matches_sorted_scalars(
        (xs, ys) in (1usize..30).prop_flat_map(|m| {
            (prop::collection::vec(-5.0f64..5.0, m), prop::collection::vec(-5.0f64..5.0, m))
        })
    ) {
        let (a, b) = (EmpiricalMeasure::from_scalars(&xs).unwrap(), EmpiricalMeasure::from_scalars(&ys).unwrap());
        let exact = w1_assignment(&a, &b, GroundMetric::Euclidean).unwrap();
        prop_assert!((exact - w1_sorted_1d(&a, &b).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn dictionary_lower_bound_below_transport_upper(
        (w, xs, ys) in (1usize..4, 1usize..12).prop_flat_map(|(w, m)| {
            (Just(w), prop::collection::vec(-3.0f64..3.0, w * m), prop::collection::vec(-3.0f64..3.0, w * m))
        })
    ) {
        let kind = precistab::transport::AtomKind::Vector(w);
        let a = EmpiricalMeasure::new(kind, xs).unwrap();
        let b = EmpiricalMeasure::new(kind, ys).unwrap();
        let upper = fm2_upper(&a, &b).unwrap();
        for order in [1, 2] {
            prop_assert!(fm_lower_dictionary(&a, &b, order).unwrap() <= upper + 1e-12);
        }
    }

    #[test]
    fn precision_respects_ell1_cap(
        (sigma, lambda) in ((1usize..6).prop_flat_map(psd), prop::sample::select(vec![0.1, 0.5, 1.0, 3.0]))
    ) {
        let n = sigma.n() as f64;
        let r = solve_default(&PrecisionProblem::new(lambda, sigma).unwrap()).unwrap();
        prop_assert!(r.s_star.norm_entry1() <= n / lambda + 1e-6);
        prop_assert!(r.s_star.min_eigenvalue() > 0.0);
    }

    #[test]
    fn portfolio_solution_is_feasible(
        (mu, sigma, t) in (2usize..6).prop_flat_map(|n| {
            (prop::collection::vec(-0.5f64..0.5, n), psd(n), 0.0f64..=1.0)
        })
    ) {
        let (lo, hi) = feasible_interval(&mu);
        let z = lo + t * (hi - lo);
        let p = PortfolioProblem::new(mu.clone(), sigma.clone(), z).unwrap();
        let s = solve_markowitz(&p).unwrap();
        prop_assert!(s.w.iter().all(|&x| x >= 0.0));
        prop_assert!((s.w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let ret: f64 = s.w.iter().zip(&mu).map(|(a, b)| a * b).sum();
        prop_assert!((ret - z).abs() < 1e-9);
        prop_assert!((s.value - 0.5 * sigma.quad_form(&s.w)).abs() < 1e-12);
        prop_assert!(s.stationarity(&p) < 1e-8);
    }

    #[test]
    fn portfolio_value_half_lipschitz_in_sigma(
        (mu, s1, s2, t) in (2usize..5).prop_flat_map(|n| {
            (prop::collection::vec(-0.5f64..0.5, n), psd(n), psd(n), 0.0f64..=1.0)
        })
    ) {
        let (lo, hi) = feasible_interval(&mu);
        let z = lo + t * (hi - lo);
        let gap = (value_v(&mu, &s1, z).unwrap() - value_v(&mu, &s2, z).unwrap()).abs();
        prop_assert!(gap <= 0.5 * (&s1 - &s2).norm_fro() + 1e-10);
    }

    #[test]
    fn constant_returns_not_admissible(a in -3.0f64..3.0, n in 1usize..6) {
        prop_assert!(!membership_admissible(&vec![a; n], 0.1, 10.0).unwrap());
    }

    #[test]
    fn sampling_is_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let spec = DistributionSpec::Gaussian {
            mu: vec![0.5, -1.0],
            sigma: SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.5]]).unwrap(),
        };
        let a = sample(&spec, 16, &mut stream(seed, index, Role::P)).unwrap();
        let b = sample(&spec, 16, &mut stream(seed, index, Role::P)).unwrap();
        let c = sample(&spec, 16, &mut stream(seed, index, Role::Q)).unwrap();
        prop_assert_eq!(sample_cov(&a, true), sample_cov(&b, true));
        prop_assert_ne!(sample_cov(&a, true), sample_cov(&c, true));
    }
}
