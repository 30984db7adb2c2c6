mod common;

use common::frozen::*;
use common::*;
use rwre_ldp::environment::{EnvKind, Environment};
use rwre_ldp::passage::{lambda, lambda_prime, ULimitOptions};
use rwre_ldp::rate::*;
use rwre_ldp::tilt::ansatz_measure;

fn law_of(env: &Environment) -> rwre_ldp::JumpLaw {
    match env.kind() {
        EnvKind::Homogeneous(l) => l.clone(),
        _ => unreachable!(),
    }
}

#[test]
fn homogeneous_rate_is_cramer() {
    for env in homogeneous_corpus() {
        let b = env.bound() as f64;
        let opts = RateOptions::for_env(&env).unwrap();
        let law = law_of(&env);
        for k in 0..21 {
            let xi = b * (-0.95 + 1.9 * k as f64 / 20.0);
            let v = rate(&env, xi, &opts).unwrap();
            let c = cramer_oracle(&law, xi);
            assert!((v.value - c).abs() < 1e-7, "xi={xi}: {} vs {c} ({:?})", v.value, v.branch);
        }
    }
}

#[test]
fn periodic_rate_matches_spectral_oracle() {
    for env in periodic_corpus().into_iter().take(4) {
        let b = env.bound() as f64;
        let opts = RateOptions::for_env(&env).unwrap();
        for xi in [-0.6 * b, -0.1 * b, 0.0, 0.3 * b, 0.8 * b] {
            let v = rate(&env, xi, &opts).unwrap();
            let truth = spectral_rate(&env, xi);
            assert!((v.value - truth).abs() < 1e-7, "xi={xi}: {} vs {truth}", v.value);
        }
    }
}

#[test]
fn zero_speed_gives_critical_tilt() {
    for env in periodic_corpus() {
        let opts = RateOptions::for_env(&env).unwrap();
        let v = rate(&env, 0.0, &opts).unwrap();
        assert_eq!(v.branch, Branch::Zero);
        assert!(v.value >= opts.rc.lo && v.value <= opts.rc.hi);
        assert!((v.value - spectral(&env).r_c).abs() < 1e-8);
    }
}

#[test]
fn endpoints_and_beyond() {
    let opts = RateOptions::for_env(&srw()).unwrap();
    let one = rate(&srw(), 1.0, &opts).unwrap();
    assert_eq!(one.branch, Branch::Endpoint);
    assert!((one.value - std::f64::consts::LN_2).abs() < 1e-10 && one.error_bar < 1e-9);
    let minus = rate(&srw(), -1.0, &opts).unwrap();
    assert!((minus.value - std::f64::consts::LN_2).abs() < 1e-10);
    assert_eq!(rate(&srw(), 1.01, &opts).unwrap().branch, Branch::Infinite);
    let env = Environment::homogeneous(asym_law(), 1.0 / 7.0).unwrap();
    let opts = RateOptions::for_env(&env).unwrap();
    let top = rate(&env, 2.0, &opts).unwrap();
    assert!((top.value - (3.5f64).ln()).abs() <= top.error_bar, "{top:?}");
    assert!(top.error_bar < 1e-2);
}

#[test]
fn duality_at_the_maximizer() {
    let env = per2();
    let opts = RateOptions::for_env(&env).unwrap();
    for xi in [0.2, 0.5, 0.9] {
        let v = rate(&env, xi, &opts).unwrap();
        let lp = lambda_prime(&env, v.r_star, 1e-4, 1e-5, &ULimitOptions::default()).unwrap();
        assert!((lp.value - 1.0 / xi).abs() < 1e-8 * lp.value.max(1.0), "xi={xi}");
        // value beats a fine grid of competitors
        let best = (0..400)
            .map(|k| v.r_star - 0.2 + 0.001 * k as f64)
            .filter(|r| *r < opts.rc.lo)
            .map(|r| r - xi * lambda(&env, r, &ULimitOptions::default()).unwrap().value)
            .fold(f64::MIN, f64::max);
        assert!(v.value >= best - 1e-10);
        // I'(xi) = -lambda(r_star)
        let h = 1e-5;
        let slope = (rate(&env, xi + h, &opts).unwrap().value - rate(&env, xi - h, &opts).unwrap().value) / (2.0 * h);
        let lam = lambda(&env, v.r_star, &ULimitOptions::default()).unwrap().value;
        assert!((slope + lam).abs() < 1e-6);
    }
}

#[test]
fn rate_equals_entropy_of_ansatz() {
    for env in periodic_corpus() {
        let opts = RateOptions::for_env(&env).unwrap();
        for r in [-0.3, -1.2] {
            let a = ansatz_measure(&env, r, &ULimitOptions::default()).unwrap();
            let v = rate(&env, a.xi, &opts).unwrap();
            assert!((v.value - a.entropy(&env).unwrap()).abs() < 1e-6);
            assert!((v.r_star - r).abs() < 1e-6);
        }
    }
}

#[test]
fn curve_is_convex_with_critical_speed_bounds() {
    for env in periodic_corpus() {
        let b = env.bound() as f64;
        let opts = RateOptions::for_env(&env).unwrap();
        assert!(0.0 <= opts.xi_c.lower && opts.xi_c.lower <= opts.xi_c.upper && opts.xi_c.upper < b);
        assert!(-b < opts.xi_bar_c.lower && opts.xi_bar_c.upper <= 0.0);
        let grid: Vec<f64> = (0..31).map(|k| b * (-0.9 + 1.8 * k as f64 / 30.0)).collect();
        let curve = rate_curve(&env, &grid, &opts).unwrap();
        assert!(curve.convexity_defect() < 1e-9);
        assert!(curve.samples.iter().all(|s| s.value >= -1e-12));
    }
}

#[test]
fn nearest_neighbor_symmetry_identity() {
    let env = per2();
    let opts = RateOptions::for_env(&env).unwrap();
    let rep = symmetry_gap(&env, &[-0.1, -0.5, -1.0, -2.0, -4.0], &[0.1, 0.3, 0.5, 0.7, 0.9], &opts).unwrap();
    assert!((rep.e_log_rho - PER2_E_LOG_RHO).abs() < 1e-15);
    assert!(rep.max_gap_deviation < 1e-9);
    assert!(rep.max_identity_residual < 1e-8);
    let homo = Environment::homogeneous(nn(0.75), 0.25).unwrap();
    let opts = RateOptions::for_env(&homo).unwrap();
    let rep = symmetry_gap(&homo, &[-0.5], &[0.5], &opts).unwrap();
    assert!((rep.e_log_rho - (1.0f64 / 3.0).ln()).abs() < 1e-15);
    assert!(matches!(
        symmetry_gap(&Environment::homogeneous(asym_law(), 0.1).unwrap(), &[-1.0], &[0.1], &opts),
        Err(RateError::NotNearestNeighbor)
    ));
}

#[test]
fn bounded_jump_asymmetry() {
    let rep = asymmetry_demo(&asym_law(), &ASYMMETRY_R_VALUES, &ULimitOptions::default()).unwrap();
    for (row, gap) in rep.rows.iter().zip(ASYM_GAPS) {
        assert!((row.gap_poly() - gap).abs() < 1e-13);
        assert!((row.gap_pipeline() - gap).abs() < 1e-9);
    }
    assert!(rep.variation_pipeline > 1e-3);
    let symmetric = rwre_ldp::JumpLaw::new(2, &[(-2, 0.2), (-1, 0.3), (1, 0.3), (2, 0.2)]).unwrap();
    let rep = asymmetry_demo(&symmetric, &ASYMMETRY_R_VALUES, &ULimitOptions::default()).unwrap();
    assert!(rep.rows.iter().all(|r| r.gap_pipeline().abs() < 1e-10));
    let nn_rep = asymmetry_demo(&nn(0.3), &ASYMMETRY_R_VALUES, &ULimitOptions::default()).unwrap();
    assert!(nn_rep.variation_pipeline < 1e-8);
}

#[test]
fn cramer_oracle_cross_checks() {
    assert!((cramer_oracle(&nn(0.5), 0.5) - SRW_CRAMER_HALF).abs() < 1e-14);
    let env = Environment::homogeneous(asym_law(), 1.0 / 7.0).unwrap();
    let opts = RateOptions::for_env(&env).unwrap();
    assert!((rate(&env, 0.5, &opts).unwrap().value - cramer_oracle(&asym_law(), 0.5)).abs() < 1e-7);
    assert_eq!(cramer_oracle(&asym_law(), 2.5), f64::INFINITY);
    assert!(cramer_oracle(&asym_law(), asym_law().mean()).abs() < 1e-14);
}
