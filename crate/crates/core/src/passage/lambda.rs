use rayon::prelude::*;
use serde::Serialize;

use super::sweep::{u_limit, ULimitOptions};
use super::PassageError;
use crate::environment::Environment;

/// `lambda(r)` (or `lambda_bar(r)`) with the truncation that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaValue {
    pub r: f64,
    /// `+inf` when `r` is supercritical.
    pub value: f64,
    pub converged: bool,
    pub supercritical: bool,
    pub n_used: i64,
    pub m_used: i64,
    /// Naive standard error of the window average (sampled windows only).
    pub std_err: Option<f64>,
    /// Central-half minus central-quarter average (sampled windows only).
    pub window_diff: Option<f64>,
}

impl LambdaValue {
    fn supercritical(r: f64) -> Self {
        Self {
            r,
            value: f64::INFINITY,
            converged: false,
            supercritical: true,
            n_used: 0,
            m_used: 0,
            std_err: None,
            window_diff: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `lambda(r) = -mean log u_r(., 1)`: exact over one period for periodic
/// environments, a central-half window average for sampled windows.
pub fn lambda(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<LambdaValue, PassageError> {
    let (range, window) = match (env.period(), env.window()) {
        (Some(l), _) => ((0, l as i64 - 1), false),
        (None, Some((lo, hi))) => ((lo / 2, hi / 2), true),
        (None, None) => unreachable!("environment is periodic or windowed"),
    };
    let u = match u_limit(env, r, range, opts) {
        Ok(u) => u,
        Err(e) if e.is_supercritical() => return Ok(LambdaValue::supercritical(r)),
        Err(e) => return Err(e),
    };
    let logs: Vec<f64> = u.sites().map(|x| u.log_u(x, 1)).collect();
    let mean = -logs.iter().sum::<f64>() / logs.len() as f64;
    let (std_err, window_diff) = if window {
        let k = logs.len() as f64;
        let var = logs.iter().map(|v| (-v - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
        let q = logs.len() / 4;
        let inner = &logs[q..logs.len() - q];
        let inner_mean = -inner.iter().sum::<f64>() / inner.len() as f64;
        (Some((var / k).sqrt()), Some(mean - inner_mean))
    } else {
        (None, None)
    };
    Ok(LambdaValue {
        r,
        value: mean,
        converged: u.converged,
        supercritical: false,
        n_used: u.n_used,
        m_used: u.m_used,
        std_err,
        window_diff,
    })
}

/// Left-passage exponent: `lambda` of the reflected environment.
pub fn lambda_bar(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<LambdaValue, PassageError> {
    lambda(&env.reflect(), r, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcOptions {
    /// Target bracket width.
    pub tol: f64,
    /// Lower start of the bisection (walked further down if needed).
    pub lower_start: f64,
    pub u: ULimitOptions,
}

impl Default for RcOptions {
    fn default() -> Self {
        Self { tol: 1e-8, lower_start: -0.25, u: ULimitOptions { tol: 1e-10, ..ULimitOptions::default() } }
    }
}

/// Brackets for the critical tilt seen from both directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RcEstimate {
    pub lo: f64,
    pub hi: f64,
    pub reflected_lo: f64,
    pub reflected_hi: f64,
    /// Distance between the two bracket midpoints.
    pub gap: f64,
    /// `gap <= 2 tol`.
    pub consistent: bool,
}

impl RcEstimate {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

fn subcritical(env: &Environment, r: f64, opts: &ULimitOptions) -> bool {
    let range = match (env.period(), env.window()) {
        (Some(l), _) => (0, l as i64 - 1),
        (_, Some((lo, hi))) => (lo / 2, hi / 2),
        _ => unreachable!(),
    };
    matches!(u_limit(env, r, range, opts), Ok(u) if u.converged)
}

fn bracket(env: &Environment, opts: &RcOptions) -> (f64, f64) {
    let mut hi = -env.delta().ln() + 0.01;
    let mut lo = opts.lower_start.min(hi - opts.tol);
    let mut step = (hi - lo).max(0.25);
    while !subcritical(env, lo, &opts.u) && lo > -1e3 {
        hi = lo;
        lo -= step;
        step *= 2.0;
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if subcritical(env, mid, &opts.u) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Bisection for the edge of the region where `u_r` converges, run on the
/// environment and on its reflection. The upper start is `-log delta`, an
/// upper bound for the critical value under ellipticity.
pub fn estimate_rc(env: &Environment, opts: &RcOptions) -> RcEstimate {
    let ((lo, hi), (rlo, rhi)) = rayon::join(|| bracket(env, opts), || bracket(&env.reflect(), opts));
    let gap = (0.5 * (lo + hi) - 0.5 * (rlo + rhi)).abs();
    RcEstimate { lo, hi, reflected_lo: rlo, reflected_hi: rhi, gap, consistent: gap <= 2.0 * opts.tol }
}

/// Two independent estimates of `lambda'(r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaPrime {
    pub r: f64,
    /// Central difference `(lambda(r + h) - lambda(r - h)) / 2h`.
    pub finite_difference: f64,
    /// `1 / drift` of the tilted stationary chain (periodic environments).
    pub stationary_chain: Option<f64>,
    pub gap: Option<f64>,
    /// Stationary-chain value when available, else the finite difference.
    pub value: f64,
}

/// `lambda'(r)` by central differences and, for periodic environments, as
/// the inverse drift of the tilted chain. `gate` bounds the relative gap.
pub fn lambda_prime(
    env: &Environment,
    r: f64,
    h_step: f64,
    gate: f64,
    opts: &ULimitOptions,
) -> Result<LambdaPrime, PassageError> {
    let plus = lambda(env, r + h_step, opts)?;
    let minus = lambda(env, r - h_step, opts)?;
    if plus.supercritical || minus.supercritical {
        return Err(PassageError::Supercritical { r: r + h_step, detail: "finite-difference stencil".into() });
    }
    let fd = (plus.value - minus.value) / (2.0 * h_step);
    let chain = if env.period().is_some() {
        let drift = crate::tilt::tilted_drift(env, r, opts).map_err(|e| PassageError::Tilt(e.to_string()))?;
        Some(1.0 / drift)
    } else {
        None
    };
    let gap = chain.map(|c| (c - fd).abs());
    if let (Some(c), Some(g)) = (chain, gap) {
        if g > gate * c.abs().max(1.0) {
            return Err(PassageError::MethodsDisagree { fd, chain: c });
        }
    }
    Ok(LambdaPrime { r, finite_difference: fd, stationary_chain: chain, gap, value: chain.unwrap_or(fd) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaPoint {
    pub r: f64,
    pub lambda: LambdaValue,
    pub lambda_bar: LambdaValue,
}

/// `lambda` and `lambda_bar` on an r grid together with the critical bracket.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaCurve {
    pub points: Vec<LambdaPoint>,
    pub rc: RcEstimate,
}

impl LambdaCurve {
    /// Largest violation of discrete convexity, `max(-second difference)`,
    /// over consecutive finite values of `lambda` (or `lambda_bar`).
    pub fn convexity_defect(&self, left: bool) -> f64 {
        let vals: Vec<f64> = self
            .points
            .iter()
            .map(|p| if left { p.lambda_bar.value } else { p.lambda.value })
            .filter(|v| v.is_finite())
            .collect();
        vals.windows(3).map(|w| -(w[0] - 2.0 * w[1] + w[2])).fold(0.0, f64::max)
    }
}

pub fn lambda_curve(
    env: &Environment,
    grid: &[f64],
    opts: &ULimitOptions,
    rc_opts: &RcOptions,
) -> Result<LambdaCurve, PassageError> {
    let reflected = env.reflect();
    let points = grid
        .par_iter()
        .map(|&r| Ok(LambdaPoint { r, lambda: lambda(env, r, opts)?, lambda_bar: lambda(&reflected, r, opts)? }))
        .collect::<Result<Vec<_>, PassageError>>()?;
    Ok(LambdaCurve { points, rc: estimate_rc(env, rc_opts) })
}
