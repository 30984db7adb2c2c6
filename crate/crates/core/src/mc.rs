//! Seeded Monte Carlo checks of the limit theorems behind the tilt.
//!
//! Replica `i` of a check with seed `s` draws from `CounterRng::new(s, i)`.
//! Replicas run in parallel but are collected in index order and reduced
//! sequentially, so every report is bit-reproducible.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::environment::{offsets, Environment};
use crate::passage::{estimate_rc, lambda_prime, u_limit_periodic, PassageError, RcOptions, ULimitOptions};
use crate::rng::CounterRng;
use crate::tilt::{corrector, invariant_density, lambda_from_u, tilt_kernel, DensityMode, TiltError, TiltedKernel};

/// Default z-score gate.
pub const GATE: f64 = 3.0;

/// Fraction of censored replicas above which a passage report is invalid.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error("Monte Carlo checks need a periodic or homogeneous environment")]
    NotPeriodic,
    #[error("r = {r} is not below the critical bracket (lower end {rc_lo})")]
    NotSubcritical { r: f64, rc_lo: f64 },
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelTag {
    Original,
    Tilted { r: f64 },
}

/// Per-site inverse-CDF tables in offset order.
#[derive(Debug, Clone)]
pub struct Sampler {
    tag: KernelTag,
    bound: usize,
    period: Option<usize>,
    lo: i64,
    cum: Vec<Vec<f64>>,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    row.iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

impl Sampler {
    pub fn original(env: &Environment) -> Self {
        let (lo, n, period) = match (env.period(), env.window()) {
            (Some(l), _) => (0, l as i64, Some(l)),
            (None, Some((lo, hi))) => (lo, hi - lo + 1, None),
            _ => unreachable!("environment is periodic or windowed"),
        };
        let cum = (lo..lo + n).map(|x| cumulative(env.law_at(x).expect("site in range").probs())).collect();
        Self { tag: KernelTag::Original, bound: env.bound(), period, lo, cum }
    }

    pub fn tilted(kernel: &TiltedKernel) -> Self {
        let cum =
            (kernel.site_lo..=kernel.site_hi).map(|x| cumulative(kernel.row(x).expect("site in range"))).collect();
        Self {
            tag: KernelTag::Tilted { r: kernel.r },
            bound: kernel.bound,
            period: kernel.period,
            lo: kernel.site_lo,
            cum,
        }
    }

    pub fn tag(&self) -> KernelTag {
        self.tag
    }

    fn row(&self, x: i64) -> Option<&[f64]> {
        let i = match self.period {
            Some(l) => (x - self.lo).rem_euclid(l as i64),
            None => x - self.lo,
        };
        (i >= 0).then(|| self.cum.get(i as usize).map(Vec::as_slice)).flatten()
    }

    /// One jump from `x`, or `None` when `x` has no row.
    pub fn step(&self, x: i64, rng: &mut CounterRng) -> Option<i64> {
        let row = self.row(x)?;
        let u = rng.uniform() * row[row.len() - 1];
        let k = row.iter().position(|c| u < *c).unwrap_or(row.len() - 1);
        Some(offsets(self.bound).nth(k).expect("offset index"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkPath {
    pub sites: Vec<i64>,
    pub kernel: KernelTag,
    pub seed: u64,
    pub stream: u64,
    /// The walk left the sampled window before `steps` jumps.
    pub truncated: bool,
}

pub fn simulate(sampler: &Sampler, start: i64, steps: usize, seed: u64, stream: u64) -> WalkPath {
    let mut rng = CounterRng::new(seed, stream);
    let mut sites = Vec::with_capacity(steps + 1);
    sites.push(start);
    let mut x = start;
    let mut truncated = false;
    for _ in 0..steps {
        match sampler.step(x, &mut rng) {
            Some(z) => {
                x += z;
                sites.push(x);
            }
            None => {
                truncated = true;
                break;
            }
        }
    }
    WalkPath { sites, kernel: sampler.tag(), seed, stream, truncated }
}

/// Steps until the walk from `start` first reaches `[level, inf)`, or `None`
/// after `cap` steps.
fn hitting_time(sampler: &Sampler, start: i64, level: i64, cap: u64, rng: &mut CounterRng) -> Option<u64> {
    let mut x = start;
    for t in 1..=cap {
        x += sampler.step(x, rng)?;
        if x >= level {
            return Some(t);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub name: String,
    pub r: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub replicas: usize,
    pub target: f64,
    pub z_score: f64,
    pub gate: f64,
    pub pass: bool,
    /// Censored or truncated replicas.
    pub failures: usize,
    pub hard_invariant_ok: bool,
    /// Probability of failing the gate if the true mean were twice the
    /// target (two-sided checks only).
    pub power: Option<f64>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Power of the two-sided `gate`-sigma test against a mean of `2 target`.
pub fn power_against_double(target: f64, std_err: f64, gate: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let d = target.abs() / std_err;
    n.cdf(d - gate) + n.cdf(-d - gate)
}

struct Tilted {
    kernel: TiltedKernel,
    lambda: f64,
    u: crate::passage::ULimit,
}

fn tilted(env: &Environment, r: f64) -> Result<Tilted, McError> {
    if env.period().is_none() {
        return Err(McError::NotPeriodic);
    }
    let u = u_limit_periodic(env, r, &ULimitOptions::default())?;
    let kernel = tilt_kernel(env, &u)?;
    Ok(Tilted { kernel, lambda: lambda_from_u(&u), u })
}

fn check_replicas(replicas: usize) -> Result<(), McError> {
    if replicas < 2 {
        return Err(McError::BadArgument("need at least two replicas".into()));
    }
    Ok(())
}

fn z_report(name: &str, r: f64, samples: &[f64], target: f64, failures: usize, replicas: usize) -> McReport {
    let (mean, se) = mean_se(samples);
    let z = if se > 0.0 {
        (mean - target) / se
    } else if mean == target {
        0.0
    } else {
        f64::INFINITY
    };
    let valid = (failures as f64) <= MAX_FAILURE_FRACTION * replicas as f64;
    McReport {
        name: name.into(),
        r,
        estimate: mean,
        std_err: se,
        replicas,
        target,
        z_score: z,
        gate: GATE,
        pass: valid && z.abs() <= GATE,
        failures,
        hard_invariant_ok: true,
        power: Some(power_against_double(target, se, GATE)),
    }
}

/// `tau_n / n` under the tilted kernel against `lambda'(r)`.
pub fn passage_lln_check(env: &Environment, r: f64, n: u64, replicas: usize, seed: u64) -> Result<McReport, McError> {
    check_replicas(replicas)?;
    let t = tilted(env, r)?;
    let target = lambda_prime(env, r, 1e-4, 1e-5, &ULimitOptions::default())?.value;
    let sampler = Sampler::tilted(&t.kernel);
    let cap = (50.0 * n as f64 * target).ceil() as u64;
    let times: Vec<Option<u64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| hitting_time(&sampler, 0, n as i64, cap, &mut CounterRng::new(seed, i)))
        .collect();
    let samples: Vec<f64> = times.iter().flatten().map(|t| *t as f64 / n as f64).collect();
    let failures = replicas - samples.len();
    Ok(z_report("passage_lln", r, &samples, target, failures, replicas))
}

/// `X_steps / steps` under the tilted kernel against the tilted drift.
pub fn empirical_velocity_check(
    env: &Environment,
    r: f64,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<McReport, McError> {
    check_replicas(replicas)?;
    let t = tilted(env, r)?;
    let target = invariant_density(&t.kernel, DensityMode::PeriodicExact)?.drift;
    let sampler = Sampler::tilted(&t.kernel);
    let ends: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = CounterRng::new(seed, i);
            let mut x = 0i64;
            for _ in 0..steps {
                x += sampler.step(x, &mut rng).expect("periodic rows");
            }
            x as f64 / steps as f64
        })
        .collect();
    Ok(z_report("empirical_velocity", r, &ends, target, 0, replicas))
}

/// `H_m(r) = m! / (r_c - r)^m (delta e^r)^{-2B}`.
pub fn moment_bound(m: u32, r: f64, r_c: f64, delta: f64, bound: usize) -> f64 {
    let fact: f64 = (1..=m).map(f64::from).product();
    fact / (r_c - r).powi(m as i32) * (delta * r.exp()).powi(-2 * bound as i32)
}

/// One-sided check `mean(tau_1^m) - 3 SE <= H_m(r)` under the tilted kernel.
/// The upper end of the critical bracket is used, which makes `H_m` smaller.
pub fn moment_bound_check(env: &Environment, r: f64, m: u32, replicas: usize, seed: u64) -> Result<McReport, McError> {
    check_replicas(replicas)?;
    if !(1..=2).contains(&m) {
        return Err(McError::BadArgument(format!("moment order {m} not in 1..=2")));
    }
    let rc = estimate_rc(env, &RcOptions::default());
    if r >= rc.lo {
        return Err(McError::NotSubcritical { r, rc_lo: rc.lo });
    }
    let t = tilted(env, r)?;
    let target = moment_bound(m, r, rc.hi, env.delta(), env.bound());
    let sampler = Sampler::tilted(&t.kernel);
    let times: Vec<Option<u64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| hitting_time(&sampler, 0, 1, 1 << 24, &mut CounterRng::new(seed, i)))
        .collect();
    let samples: Vec<f64> = times.iter().flatten().map(|t| (*t as f64).powi(m as i32)).collect();
    let failures = replicas - samples.len();
    let (mean, se) = mean_se(&samples);
    let z = if se > 0.0 {
        (mean - target) / se
    } else if mean <= target {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    Ok(McReport {
        name: format!("moment_bound_m{m}"),
        r,
        estimate: mean,
        std_err: se,
        replicas,
        target,
        z_score: z,
        gate: GATE,
        pass: failures == 0 && z <= GATE,
        failures,
        hard_invariant_ok: true,
        power: None,
    })
}

/// Gate on `|S_N| / N` for the corrector sums.
pub const SUBLINEAR_GATE: f64 = 1e-3;

/// Corrector sums `S_n = sum_{k<n} F(X_k, X_{k+1} - X_k)` along untilted and
/// tilted paths. For periodic environments `S_n = F(0, X_n)` exactly, so
/// `|S_n|` is bounded by the potential range plus the accumulated period-loop
/// and rounding defects; any excess is a hard invariant violation.
pub fn corrector_sublinearity_check(
    env: &Environment,
    r: f64,
    steps: usize,
    replicas: usize,
    seed: u64,
) -> Result<McReport, McError> {
    check_replicas(replicas)?;
    let t = tilted(env, r)?;
    let f = corrector(env, &t.u, t.lambda)?;
    let l = env.period().expect("checked periodic") as f64;
    let range = f.potential_range().expect("periodic corrector");
    let loop_sum = f.loop_sum.unwrap_or(0.0);
    // per-step rounding: the sum and F(0, X_n) differ by at most the
    // observed cocycle defect per step
    let per_step = f.cocycle + f.antisymmetry + 4.0 * f64::EPSILON * f.max_abs;
    let samplers = [Sampler::original(env), Sampler::tilted(&t.kernel)];
    let results: Vec<(f64, bool)> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let sampler = &samplers[(i % 2) as usize];
            let mut rng = CounterRng::new(seed, i);
            let (mut x, mut s) = (0i64, 0.0f64);
            let mut ok = true;
            for n in 1..=steps {
                let z = sampler.step(x, &mut rng).expect("periodic rows");
                s += f.at(x, z);
                x += z;
                let allowed = range + (x.abs() as f64 / l + 1.0) * loop_sum + n as f64 * per_step + 1e-12;
                ok &= s.abs() <= allowed;
            }
            (s.abs() / steps as f64, ok)
        })
        .collect();
    let hard_ok = results.iter().all(|(_, ok)| *ok);
    let worst = results.iter().map(|(v, _)| *v).fold(0.0, f64::max);
    let samples: Vec<f64> = results.iter().map(|(v, _)| *v).collect();
    let (_, se) = mean_se(&samples);
    Ok(McReport {
        name: "corrector_sublinearity".into(),
        r,
        estimate: worst,
        std_err: se,
        replicas,
        target: 0.0,
        z_score: worst / SUBLINEAR_GATE,
        gate: SUBLINEAR_GATE,
        pass: hard_ok && worst <= SUBLINEAR_GATE,
        failures: 0,
        hard_invariant_ok: hard_ok,
        power: None,
    })
}
