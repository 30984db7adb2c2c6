mod common;

use common::*;
use proptest::prelude::*;
use rwre_ldp::environment::{EnvError, Environment, JumpLaw, Violation};

fn law_strategy(bound: usize) -> impl Strategy<Value = JumpLaw> {
    prop::collection::vec(0.05f64..1.0, 2 * bound).prop_map(move |w| {
        let s: f64 = w.iter().sum();
        JumpLaw::from_probs(bound, w.iter().map(|x| x / s).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn reflection_is_an_involution(laws in prop::collection::vec(law_strategy(2), 1..6)) {
        let env = Environment::periodic(laws, 0.01).unwrap();
        prop_assert_eq!(env.reflect().reflect(), env.clone());
        let l = env.period().unwrap() as i64;
        let refl = env.reflect();
        for x in -7..7i64 {
            for z in [-2i64, -1, 1, 2] {
                prop_assert_eq!(refl.law_at(x).unwrap().prob(z), env.law_at(-x).unwrap().prob(-z));
            }
            prop_assert_eq!(env.law_at(x + l).unwrap(), env.law_at(x).unwrap());
        }
    }

    #[test]
    fn window_reflection_mirrors_sites(seed in 0u64..500, lo in -20i64..-1, hi in 1i64..20) {
        let atoms = [(0.3, nn(0.2)), (0.7, nn(0.7))];
        let env = Environment::sample_iid(&atoms, lo, hi, seed, 0.2).unwrap();
        let refl = env.reflect();
        prop_assert_eq!(refl.window(), Some((-hi, -lo)));
        for x in lo..=hi {
            prop_assert_eq!(refl.law_at(-x).unwrap(), &env.law_at(x).unwrap().reflected());
        }
    }

    #[test]
    fn iid_draw_does_not_depend_on_window(seed in 0u64..500, grow in 1i64..50) {
        let atoms = [(0.5, nn(0.3)), (0.5, nn(0.6))];
        let small = Environment::sample_iid(&atoms, -10, 10, seed, 0.3).unwrap();
        let big = Environment::sample_iid(&atoms, -10, 10 + grow, seed, 0.3).unwrap();
        for x in -10..=10 {
            prop_assert_eq!(small.law_at(x).unwrap(), big.law_at(x).unwrap());
        }
    }
}

#[test]
fn window_exhaustion_is_an_error() {
    let env = Environment::sample_iid(&[(1.0, nn(0.5))], -3, 3, 0, 0.5).unwrap();
    assert!(matches!(env.law_at(4), Err(EnvError::WindowExhausted { .. })));
}

#[test]
fn ellipticity_violation_is_reported() {
    let env = Environment::homogeneous(nn(0.95), 0.1).unwrap();
    let d = env.validate();
    assert!(d.violations.iter().any(|v| matches!(v, Violation::Ellipticity { offset: -1, .. })));
    assert!(env.ensure_valid().is_err());
}

#[test]
fn delta_range() {
    assert!(Environment::homogeneous(nn(0.5), 0.0).is_err());
    assert!(Environment::homogeneous(nn(0.5), 0.6).is_err());
    assert!(Environment::homogeneous(nn(0.5), 0.5).is_ok());
}

#[test]
fn json_specs() {
    let env = Environment::from_json(
        r#"{"type":"iid","B":1,"delta":0.2,"seed":9,"window":[-50,50],
            "atoms":[{"weight":1,"law":{"-1":0.3,"1":0.7}},{"weight":1,"law":{"-1":0.6,"1":0.4}}]}"#,
    )
    .unwrap();
    assert_eq!(env.window(), Some((-50, 50)));
    assert!(env.validate().is_valid());
    assert!(Environment::from_json(
        r#"{"type":"homogeneous","B":1,"delta":0.5,"laws":[{"1":0.5,"-1":0.5}],"extra":1}"#
    )
    .is_err());
    assert!(Environment::from_json(r#"{"type":"homogeneous","B":1,"delta":0.5,"laws":[{"x":0.5}]}"#).is_err());
}

#[test]
fn random_periodic_is_elliptic_and_reproducible() {
    for (l, b, s) in [(1, 1, 0), (4, 2, 1), (7, 3, 2)] {
        let e = Environment::random_periodic(l, b, 0.05, s).unwrap();
        assert!(e.validate().is_valid());
        assert_eq!(e, Environment::random_periodic(l, b, 0.05, s).unwrap());
    }
}
