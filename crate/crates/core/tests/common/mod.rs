//! Shared oracles and fixtures for the integration tests.
//!
//! The spectral oracle is deliberately independent of the library's
//! passage-time machinery: for a periodic environment the right/left passage
//! exponents are level crossings of the log Perron root
//! `Lambda(theta) = log rho(M(theta))`, with
//! `M(theta)[i][j] = sum_{z : (i + z) mod L = j} p_i(z) e^{theta z}`.
//! Then `lambda(r) = -theta_+` and `lambda_bar(r) = theta_-`, where
//! `theta_- < theta_+` solve `Lambda(theta) = -r`, and `r_c = -min Lambda`.
#![allow(dead_code)]

use rwre_ldp::environment::{Environment, JumpLaw};

/// Frozen 30-digit values computed with mpmath, kept to 18 digits.
pub mod frozen {
    /// Symmetric nearest-neighbor walk at r = -0.1.
    pub const SRW_ZETA: f64 = 0.634636372946206747;
    pub const SRW_LAMBDA: f64 = -0.454703085140535414;
    pub const SRW_LAMBDA_PRIME: f64 = 2.348756174260537161;
    pub const SRW_LAMBDA_PRIME_AT_MINUS_3: f64 = 1.001241684937680062;
    pub const SRW_TILT_RIGHT: f64 = 0.712878631455823990;
    pub const SRW_TILT_LEFT: f64 = 0.287121368544176010;
    pub const SRW_DRIFT: f64 = 0.425757262911647981;
    /// Cramér rate of the simple walk at xi = 1/2.
    pub const SRW_CRAMER_HALF: f64 = 0.130812035941136959;

    /// Law (p(-2), p(-1), p(1), p(2)) = (1/7, 3/7, 1/7, 2/7): for each r the
    /// positive roots (x_left, x_right) of 2x^4 + x^3 - 7e^{-r}x^2 + 3x + 1.
    pub const ASYM_ROOTS: [(f64, f64, f64); 4] = [
        (-0.25, 0.607891056924482205, 1.600444661252823658),
        (-0.5, 0.479646609971179198, 1.973658124309414421),
        (-1.0, 0.327473501495927438, 2.743895129474429851),
        (-2.0, 0.171498152605148673, 4.808719226557708926),
    ];
    pub const ASYM_GAPS: [f64; 4] =
        [-0.027478091843095151, -0.054816938750725586, -0.106969647631412101, -0.192752008820023462];

    /// Periodic [p_0(1), p_1(1)] = [0.8, 0.4] at r = -0.2.
    pub const PER2_ZETA: [f64; 2] = [0.713951638143261992, 0.504393408273822260];
    pub const PER2_LAMBDA: f64 = -0.510669398028127112;
    pub const PER2_THETA_MINUS: f64 = -1.001084024533990230;
    pub const PER2_E_LOG_RHO: f64 = -0.490414626505863118;
}

pub fn nn(p: f64) -> JumpLaw {
    JumpLaw::nearest_neighbor(p).unwrap()
}

pub fn asym_law() -> JumpLaw {
    JumpLaw::new(2, &[(-2, 1.0 / 7.0), (-1, 3.0 / 7.0), (1, 1.0 / 7.0), (2, 2.0 / 7.0)]).unwrap()
}

pub fn srw() -> Environment {
    Environment::homogeneous(nn(0.5), 0.5).unwrap()
}

pub fn per2() -> Environment {
    Environment::periodic(vec![nn(0.8), nn(0.4)], 0.2).unwrap()
}

/// Homogeneous laws used for the Cramér comparison.
pub fn homogeneous_corpus() -> Vec<Environment> {
    let laws = [
        (nn(0.5), 0.5),
        (nn(0.75), 0.25),
        (nn(0.3), 0.3),
        (asym_law(), 1.0 / 7.0),
        (JumpLaw::new(2, &[(-2, 0.1), (-1, 0.4), (1, 0.3), (2, 0.2)]).unwrap(), 0.3),
        (JumpLaw::new(2, &[(-2, 0.25), (-1, 0.25), (1, 0.25), (2, 0.25)]).unwrap(), 0.25),
    ];
    laws.into_iter().map(|(l, d)| Environment::homogeneous(l, d).unwrap()).collect()
}

/// Seeded periodic environments (L, B, delta, seed).
pub fn periodic_corpus() -> Vec<Environment> {
    [(2, 1, 0.1, 1), (3, 1, 0.15, 2), (5, 1, 0.05, 3), (2, 2, 0.1, 4), (3, 2, 0.08, 5), (4, 2, 0.1, 6)]
        .into_iter()
        .map(|(l, b, d, s)| Environment::random_periodic(l, b, d, s).unwrap())
        .collect()
}

fn transfer(env: &Environment, theta: f64) -> Vec<Vec<f64>> {
    let l = env.period().expect("periodic");
    let mut m = vec![vec![0.0; l]; l];
    for (i, row) in m.iter_mut().enumerate() {
        for (z, p) in env.law_at(i as i64).unwrap().iter() {
            let j = (i as i64 + z).rem_euclid(l as i64) as usize;
            row[j] += p * (theta * z as f64).exp();
        }
    }
    m
}

/// `log rho(M(theta))` by power iteration on `M + I` (the shift keeps the
/// iteration aperiodic without changing the Perron vector).
pub fn log_perron(env: &Environment, theta: f64) -> f64 {
    let m = transfer(env, theta);
    let l = m.len();
    let mut v = vec![1.0; l];
    for _ in 0..20_000 {
        let w: Vec<f64> = (0..l).map(|i| v[i] + (0..l).map(|j| m[i][j] * v[j]).sum::<f64>()).collect();
        let norm = w.iter().cloned().fold(0.0, f64::max);
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change < 1e-15 {
            break;
        }
    }
    // Rayleigh-type refinement on the converged vector
    let mv: Vec<f64> = (0..l).map(|i| (0..l).map(|j| m[i][j] * v[j]).sum::<f64>()).collect();
    let num: f64 = mv.iter().zip(&v).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|b| b * b).sum();
    (num / den).ln()
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..120 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa_neg = f(a) < 0.0;
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == fa_neg {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub struct Spectral {
    pub theta_min: f64,
    pub r_c: f64,
}

pub fn spectral(env: &Environment) -> Spectral {
    let theta_min = golden_min(|t| log_perron(env, t), -20.0, 20.0);
    Spectral { theta_min, r_c: -log_perron(env, theta_min) }
}

/// `(lambda(r), lambda_bar(r))` from the level crossings of `Lambda`.
pub fn spectral_lambdas(env: &Environment, r: f64) -> (f64, f64) {
    let s = spectral(env);
    let g = |t: f64| log_perron(env, t) + r;
    let mut hi = s.theta_min + 1.0;
    while g(hi) < 0.0 {
        hi += 1.0;
    }
    let mut lo = s.theta_min - 1.0;
    while g(lo) < 0.0 {
        lo -= 1.0;
    }
    (-root(g, s.theta_min, hi), root(g, lo, s.theta_min))
}

/// Level-1 rate `sup_theta { theta xi - Lambda(theta) }`.
pub fn spectral_rate(env: &Environment, xi: f64) -> f64 {
    let t = golden_min(|t| log_perron(env, t) - t * xi, -30.0, 30.0);
    t * xi - log_perron(env, t)
}
