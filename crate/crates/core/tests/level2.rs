mod common;

use common::*;
use proptest::prelude::*;
use rwre_ldp::environment::Environment;
use rwre_ldp::level2::*;
use rwre_ldp::mc::{simulate, Sampler};
use rwre_ldp::passage::ULimitOptions;
use rwre_ldp::tilt::ansatz_measure;

fn random_stationary(l: usize, b: usize, raw: &[f64]) -> PairMeasure {
    // a stationary pair measure: the tilted ansatz of a random environment
    let env = Environment::periodic(
        (0..l)
            .map(|i| {
                let w = &raw[i * 2 * b..(i + 1) * 2 * b];
                let s: f64 = w.iter().sum();
                rwre_ldp::JumpLaw::from_probs(b, w.iter().map(|x| x / s).collect()).unwrap()
            })
            .collect(),
        0.001,
    )
    .unwrap();
    let a = ansatz_measure(&env, -3.0, &ULimitOptions::default()).unwrap();
    a.measure
}

#[test]
fn minimizer_matches_ansatz_on_small_corpus() {
    let corpus: Vec<Environment> = periodic_corpus().into_iter().filter(|e| e.period().unwrap() <= 3).collect();
    for env in corpus.iter().take(3) {
        let a = ansatz_measure(env, -0.8, &ULimitOptions::default()).unwrap();
        let rep = minimize_entropy(env, a.xi, &SolverConfig::default()).unwrap();
        let h = a.entropy(env).unwrap();
        assert!(rep.converged, "{:?}", rep.projected_gradient);
        assert!((rep.value - h).abs() < 1e-7, "{} vs {h}", rep.value);
        assert!(rep.minimizer.total_variation(&a.measure) < 1e-5);
    }
}

#[test]
fn infeasible_drift_is_rejected() {
    let err = minimize_entropy(&srw(), 1.0, &SolverConfig::default()).unwrap_err();
    assert!(matches!(err, Level2Error::Infeasible { .. }));
}

#[test]
fn empirical_measure_of_long_path_is_nearly_stationary() {
    let env = per2();
    let path = simulate(&Sampler::original(&env), 0, 200_000, 5, 0);
    let mu = empirical_pair_measure(&path.sites, 2, 1).unwrap();
    assert!((mu.total() - 1.0).abs() < 1e-9);
    // boundary effect of a single path is at most 1/n per class
    assert!(mu.marginals().stationarity_residual <= 1.0 / 200_000.0 + 1e-12);
    assert!(entropy(&mu, &env).unwrap() < 1e-3);
    let back = empirical_pair_measure(&[0, 1, 3], 2, 1);
    assert!(matches!(back, Err(Level2Error::BadStep { step: 1, jump: 2 })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn entropy_is_nonnegative(seed in 0u64..1000, raw in prop::collection::vec(0.01f64..1.0, 12)) {
        let env = Environment::random_periodic(3, 2, 0.1, seed).unwrap();
        let mu = random_stationary(3, 2, &raw);
        prop_assert!(entropy(&mu, &env).unwrap() >= -1e-14);
    }

    #[test]
    fn entropy_is_convex(seed in 0u64..1000, a in prop::collection::vec(0.01f64..1.0, 8),
                         b in prop::collection::vec(0.01f64..1.0, 8), t in 0.0f64..1.0) {
        let env = Environment::random_periodic(2, 2, 0.1, seed).unwrap();
        let (m0, m1) = (random_stationary(2, 2, &a), random_stationary(2, 2, &b));
        let mix = PairMeasure::new(2, 2, m0.weights().iter().zip(m1.weights()).map(|(x, y)| (1.0 - t) * x + t * y).collect()).unwrap();
        let lhs = entropy(&mix, &env).unwrap();
        let rhs = (1.0 - t) * entropy(&m0, &env).unwrap() + t * entropy(&m1, &env).unwrap();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn shift_by_period_is_identity(raw in prop::collection::vec(0.0f64..1.0, 12), s in 0usize..6) {
        let mu = PairMeasure::new(3, 2, raw).unwrap();
        prop_assert_eq!(mu.shifted(3 * s), mu.clone());
        prop_assert!((mu.shifted(s).drift() - mu.drift()).abs() < 1e-12);
    }
}
