mod common;

use common::frozen::*;
use common::*;
use proptest::prelude::*;
use rwre_ldp::environment::{offsets, Environment};
use rwre_ldp::passage::*;

fn opts() -> ULimitOptions {
    ULimitOptions::default()
}

#[test]
fn frozen_symmetric_values() {
    let z = zeta_nn(&srw(), -0.1, None).unwrap();
    assert!((z.at(0) - SRW_ZETA).abs() < 1e-14);
    let u = u_limit_periodic(&srw(), -0.1, &opts()).unwrap();
    assert!((u.u(0, 1) - 1.0 / SRW_ZETA).abs() < 1e-11);
    let l = lambda(&srw(), -0.1, &opts()).unwrap();
    assert!((l.value - SRW_LAMBDA).abs() < 1e-11);
}

#[test]
fn frozen_period_two_values() {
    let env = per2();
    let z = zeta_nn(&env, -0.2, None).unwrap();
    assert!((z.at(0) - PER2_ZETA[0]).abs() < 1e-13);
    assert!((z.at(1) - PER2_ZETA[1]).abs() < 1e-13);
    let l = lambda(&env, -0.2, &opts()).unwrap();
    assert!((l.value - PER2_LAMBDA).abs() < 1e-11);
    let lb = lambda_bar(&env, -0.2, &opts()).unwrap();
    assert!((lb.value - PER2_THETA_MINUS).abs() < 1e-11);
    assert!((lb.value - l.value - PER2_E_LOG_RHO).abs() < 1e-10);
}

#[test]
fn zeta_matches_general_sweep_on_nearest_neighbor_corpus() {
    for env in periodic_corpus().into_iter().filter(|e| e.bound() == 1) {
        for r in [-0.05, -0.4, -2.0] {
            let z = zeta_nn(&env, r, None).unwrap();
            let u = u_limit_periodic(&env, r, &opts()).unwrap();
            for x in 0..env.period().unwrap() as i64 {
                assert!((u.log_u(x, 1) + z.at(x).ln()).abs() < 1e-10, "x={x} r={r}");
            }
        }
    }
}

#[test]
fn lambdas_match_spectral_oracle() {
    for env in periodic_corpus() {
        let rc = spectral(&env).r_c;
        for r in [rc - 0.05, rc - 0.5, -1.5] {
            let (l, lb) = spectral_lambdas(&env, r);
            let got = lambda(&env, r, &opts()).unwrap();
            let got_bar = lambda_bar(&env, r, &opts()).unwrap();
            assert!((got.value - l).abs() < 1e-9, "lambda r={r}: {} vs {l}", got.value);
            assert!((got_bar.value - lb).abs() < 1e-9, "lambda_bar r={r}: {} vs {lb}", got_bar.value);
        }
    }
}

#[test]
fn critical_tilt_matches_spectral_oracle_from_both_sides() {
    for env in periodic_corpus() {
        let rc = estimate_rc(&env, &RcOptions::default());
        let truth = spectral(&env).r_c;
        assert!(rc.lo - 1e-9 <= truth && truth <= rc.hi + 1e-9, "{rc:?} vs {truth}");
        assert!(rc.consistent, "{rc:?}");
        assert!(lambda(&env, rc.hi + 1e-3, &opts()).unwrap().supercritical);
    }
}

#[test]
fn sandwich_and_cocycle_bounds() {
    for env in periodic_corpus() {
        let d = env.delta();
        for r in [-0.1, -1.0] {
            let u = u_limit_periodic(&env, r, &opts()).unwrap();
            let q = d * r.exp();
            let b = env.bound() as i64;
            for x in u.sites() {
                for z in offsets(env.bound()) {
                    let v = u.u(x, z);
                    let k = z.unsigned_abs() as i32;
                    assert!(v >= q.powi(k) * (1.0 - 1e-12) && v <= q.powi(-k) * (1.0 + 1e-12));
                    for z2 in offsets(env.bound()) {
                        let s = z + z2;
                        if s != 0 && s.abs() <= b {
                            let lhs = u.log_u(x, s);
                            let rhs = u.log_u(x, z) + u.log_u(x + z, z2);
                            assert!((lhs - rhs).abs() < 1e-10);
                        }
                    }
                }
            }
            // harmonic identity: sum_z p(z) e^r u(x, z) = 1
            for x in u.sites() {
                let s: f64 = env.law_at(x).unwrap().iter().map(|(z, p)| p * r.exp() * u.u(x, z)).sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn characteristic_roots_agree_with_pipeline() {
    let env = Environment::homogeneous(asym_law(), 1.0 / 7.0).unwrap();
    for (r, xl, xr) in ASYM_ROOTS {
        let l = lambda(&env, r, &opts()).unwrap().value;
        let lb = lambda_bar(&env, r, &opts()).unwrap().value;
        assert!((l + xr.ln()).abs() < 1e-9);
        assert!((lb - xl.ln()).abs() < 1e-9);
    }
}

#[test]
fn truncated_value_iteration_matches_path_enumeration() {
    let env = per2();
    for r in [-0.5, -1.0, -2.0] {
        let hit = hit_mgf(&env, r, 1, 40, 1e-15, 100_000).unwrap();
        let brute = brute_mgf(&env, r, 1, 60).unwrap();
        assert!(hit.converged);
        assert!((hit.at(0) - brute.value).abs() <= brute.tail_bound + 1e-12, "r={r}");
    }
}

#[test]
fn value_iteration_flags_supercritical_tilt() {
    let s = hit_mgf(&srw(), 0.3, 5, 20, 1e-12, 100_000).unwrap();
    assert!(!s.converged);
    assert_ne!(s.status, SolveStatus::Converged);
}

#[test]
fn gamblers_ruin_at_zero_tilt() {
    // symmetric walk killed below -M, target 1: h(0) = (M + 1) / (M + 2)
    let m = 30;
    let s = hit_mgf(&srw(), 0.0, 1, m, 1e-13, 1_000_000).unwrap();
    let expected = (m as f64 + 1.0) / (m as f64 + 2.0);
    assert!((s.at(0) - expected).abs() < 1e-8, "{}", s.at(0));
}

#[test]
fn lambda_is_convex_and_increasing_on_corpus() {
    for env in periodic_corpus() {
        let rc = estimate_rc(&env, &RcOptions::default());
        let grid: Vec<f64> = (0..15).map(|k| rc.lo - 3.0 + 0.2 * k as f64).collect();
        let curve = lambda_curve(&env, &grid, &opts(), &RcOptions::default()).unwrap();
        assert!(curve.convexity_defect(false) < 1e-9);
        assert!(curve.convexity_defect(true) < 1e-9);
        assert!(curve.points.windows(2).all(|w| w[1].lambda.value > w[0].lambda.value));
    }
}

#[test]
fn lambda_prime_two_methods() {
    let lp = lambda_prime(&per2(), -0.2, 1e-4, 1e-5, &opts()).unwrap();
    let gap = lp.gap.unwrap();
    assert!(gap < 1e-6 * lp.value, "{lp:?}");
    assert!((lp.value - SRW_LAMBDA_PRIME).abs() > 1e-3);
    let far = lambda_prime(&srw(), -3.0, 1e-4, 1e-5, &opts()).unwrap();
    assert!((far.value - SRW_LAMBDA_PRIME_AT_MINUS_3).abs() < 1e-9);
}

#[test]
fn sampled_window_lambda_is_close_to_periodic_average() {
    // an iid environment with a single atom is homogeneous
    let env = Environment::sample_iid(&[(1.0, nn(0.5))], -400, 400, 3, 0.5).unwrap();
    let l = lambda(&env, -0.1, &opts()).unwrap();
    assert!((l.value - SRW_LAMBDA).abs() < 1e-9);
    assert!(l.std_err.unwrap() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reflection_swaps_exponents(seed in 0u64..1000, l in 1usize..4, b in 1usize..3, r in -2.0f64..-0.3) {
        let env = Environment::random_periodic(l, b, 0.1, seed).unwrap();
        let a = lambda_bar(&env, r, &opts()).unwrap();
        let b2 = lambda(&env.reflect(), r, &opts()).unwrap();
        prop_assert!((a.value - b2.value).abs() < 1e-12);
        prop_assert_eq!(env.reflect().reflect(), env);
    }

    #[test]
    fn lambda_is_monotone(seed in 0u64..1000, r in -3.0f64..-0.2, dr in 0.01f64..0.2) {
        let env = Environment::random_periodic(3, 2, 0.1, seed).unwrap();
        let a = lambda(&env, r - dr, &opts()).unwrap().value;
        let b = lambda(&env, r, &opts()).unwrap().value;
        prop_assert!(b > a);
        prop_assert!((b - a) / dr >= 1.0 / env.bound() as f64 - 1e-9);
    }
}
