//! Level-1 rate function by Legendre duality.
//!
//! For `xi > 0`, `I(xi) = sup_{r <= r_c} { r - xi lambda(r) }`. On the
//! strictly convex branch the supremum sits where the tilted drift
//! `1 / lambda'(r)` equals `xi`; below `xi_c = 1 / lambda'(r_c-)` it sits at
//! `r_c` and `I` is affine. Negative `xi` use `lambda_bar`, i.e. the
//! reflected environment.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::environment::{Environment, JumpLaw};
use crate::passage::{
    char_poly_roots, estimate_rc, lambda, u_limit_periodic, PassageError, RcEstimate, RcOptions, ULimitOptions,
};
use crate::tilt::{invariant_density, lambda_from_u, tilt_kernel, DensityMode, TiltError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    Tilt(#[from] TiltError),
    #[error("operation needs a nearest-neighbor environment")]
    NotNearestNeighbor,
    #[error("operation needs B >= 2")]
    NeedsLongJumps,
    #[error("invalid argument: {0}")]
    BadArgument(String),
}

/// Where the supremum defining `I(xi)` is attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Right,
    Left,
    Zero,
    Affine,
    /// `|xi| = B`, evaluated at a very negative `r`.
    Endpoint,
    /// Beyond the attainable speed.
    Infinite,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Right => "right",
            Branch::Left => "left",
            Branch::Zero => "zero",
            Branch::Affine => "affine",
            Branch::Endpoint => "endpoint",
            Branch::Infinite => "infinite",
        }
    }
}

/// Interval known to contain `xi_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiC {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub xi: f64,
    pub value: f64,
    /// Maximizing `r` (`r_c` on the zero and affine branches).
    pub r_star: f64,
    pub branch: Branch,
    /// `xi` falls inside the `xi_c` interval; `alt_value` holds the other
    /// branch's value.
    pub ambiguous: bool,
    pub alt_value: Option<f64>,
    /// Error bar from bracketing (`r_c` width, endpoint stabilization).
    pub error_bar: f64,
}

impl RateValue {
    pub fn err_flag(&self) -> &'static str {
        if self.ambiguous {
            "ambiguous"
        } else if self.branch == Branch::Endpoint && self.error_bar > 1e-9 {
            "unstable-endpoint"
        } else {
            "ok"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOptions {
    pub u: ULimitOptions,
    pub rc: RcEstimate,
    pub xi_c: XiC,
    pub xi_bar_c: XiC,
    /// Bisection tolerance on `r_star`.
    pub r_tol: f64,
    pub r_floor: f64,
    /// `r` at which the `|xi| = B` endpoint is evaluated.
    pub endpoint_r: f64,
}

impl RateOptions {
    /// Brackets `r_c` and `xi_c` for `env` with default tolerances.
    pub fn for_env(env: &Environment) -> Result<Self, RateError> {
        Self::with(env, &RcOptions::default(), &ULimitOptions::default())
    }

    pub fn with(env: &Environment, rc_opts: &RcOptions, u: &ULimitOptions) -> Result<Self, RateError> {
        let rc = estimate_rc(env, rc_opts);
        let refl = env.reflect();
        let rc_bar = RcEstimate {
            lo: rc.reflected_lo,
            hi: rc.reflected_hi,
            reflected_lo: rc.lo,
            reflected_hi: rc.hi,
            gap: rc.gap,
            consistent: rc.consistent,
        };
        let (xi_c, xi_bar) = rayon::join(|| xi_c(env, &rc, u), || xi_c(&refl, &rc_bar, u));
        let xi_bar = xi_bar?;
        Ok(Self {
            u: *u,
            rc,
            xi_c: xi_c?,
            xi_bar_c: XiC { lower: -xi_bar.upper, upper: -xi_bar.lower },
            r_tol: 1e-11,
            r_floor: -200.0,
            endpoint_r: -40.0,
        })
    }

    fn reflected(&self) -> Self {
        Self {
            rc: RcEstimate {
                lo: self.rc.reflected_lo,
                hi: self.rc.reflected_hi,
                reflected_lo: self.rc.lo,
                reflected_hi: self.rc.hi,
                ..self.rc
            },
            xi_c: XiC { lower: -self.xi_bar_c.upper, upper: -self.xi_bar_c.lower },
            xi_bar_c: XiC { lower: -self.xi_c.upper, upper: -self.xi_c.lower },
            ..*self
        }
    }
}

/// `lambda(r)` and the tilted drift `1 / lambda'(r)` from one solve
/// (periodic) or from central differences (sampled windows).
pub fn tilted_state(env: &Environment, r: f64, u: &ULimitOptions) -> Result<(f64, f64), RateError> {
    if env.period().is_some() {
        let ul = u_limit_periodic(env, r, u)?;
        let kernel = tilt_kernel(env, &ul)?;
        let dens = invariant_density(&kernel, DensityMode::PeriodicExact)?;
        Ok((lambda_from_u(&ul), dens.drift))
    } else {
        let h = 1e-5;
        let mid = lambda(env, r, u)?;
        let (p, m) = (lambda(env, r + h, u)?, lambda(env, r - h, u)?);
        if mid.supercritical || p.supercritical || m.supercritical {
            return Err(PassageError::Supercritical { r, detail: "window lambda".into() }.into());
        }
        Ok((mid.value, 2.0 * h / (p.value - m.value)))
    }
}

/// Brackets `xi_c = 1 / lambda'(r_c-)` from drifts just below `r_c`.
///
/// The drift decreases in `r`, so its value at the closest point is a valid
/// upper end. The lower end extrapolates `a + c sqrt(r_c - r)` through the
/// last two points and subtracts the change from the previous pair.
pub fn xi_c(env: &Environment, rc: &RcEstimate, u: &ULimitOptions) -> Result<XiC, RateError> {
    let steps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let mut pts = Vec::new();
    for h in steps {
        match tilted_state(env, rc.lo - h, u) {
            Ok((_, d)) => pts.push((h, d)),
            Err(_) => break,
        }
    }
    let b = env.bound() as f64;
    let Some(&(_, upper)) = pts.last() else {
        return Ok(XiC { lower: 0.0, upper: b });
    };
    let extrapolate = |(h1, d1): (f64, f64), (h2, d2): (f64, f64)| {
        let (s1, s2) = (h1.sqrt(), h2.sqrt());
        (d2 * s1 - d1 * s2) / (s1 - s2)
    };
    let lower = if pts.len() >= 3 {
        let n = pts.len();
        let a = extrapolate(pts[n - 2], pts[n - 1]);
        let a_prev = extrapolate(pts[n - 3], pts[n - 2]);
        (a - (a - a_prev).abs()).max(0.0)
    } else {
        0.0
    };
    Ok(XiC { lower: lower.min(upper), upper: upper.clamp(0.0, b) })
}

/// `r - B lambda(r)` at the most negative `r` on the back-off ladder where
/// `u_r` converges, with the change to the next rung as error bar. For
/// `B >= 2` the truncated problem has an oscillating mode whose decay rate
/// tends to one as `r -> -inf`, so very negative tilts may not converge.
fn endpoint(env: &Environment, xi: f64, opts: &RateOptions) -> Result<RateValue, RateError> {
    let b = env.bound() as f64;
    let ladder = [opts.endpoint_r, -30.0, -20.0, -15.0, -10.0, -7.5, -5.0];
    let mut found: Vec<(f64, f64)> = Vec::new();
    for r in ladder.into_iter().filter(|r| *r >= opts.endpoint_r) {
        match lambda(env, r, &opts.u) {
            Ok(l) if l.converged => found.push((r, r - b * l.value)),
            Ok(_) => {}
            Err(e) if e.is_supercritical() => {}
            Err(e) => return Err(e.into()),
        }
        if found.len() == 2 {
            break;
        }
    }
    let (&(r1, v1), rest) = found.split_first().ok_or(PassageError::SlowConvergence {
        r: opts.endpoint_r,
        gap: f64::NAN,
        n_used: opts.u.n_max,
    })?;
    let error_bar = rest.first().map_or(f64::INFINITY, |(_, v0)| (v1 - v0).abs());
    Ok(RateValue { xi, value: v1, r_star: r1, branch: Branch::Endpoint, ambiguous: false, alt_value: None, error_bar })
}

fn infinite(xi: f64) -> RateValue {
    RateValue {
        xi,
        value: f64::INFINITY,
        r_star: f64::NEG_INFINITY,
        branch: Branch::Infinite,
        ambiguous: false,
        alt_value: None,
        error_bar: 0.0,
    }
}

/// `I(xi)` with the maximizing `r` and the branch it lies on.
pub fn rate(env: &Environment, xi: f64, opts: &RateOptions) -> Result<RateValue, RateError> {
    let b = env.bound() as f64;
    if !xi.is_finite() {
        return Err(RateError::BadArgument(format!("xi = {xi}")));
    }
    if xi.abs() > b {
        return Ok(infinite(xi));
    }
    if xi == 0.0 {
        return Ok(RateValue {
            xi,
            value: opts.rc.mid(),
            r_star: opts.rc.mid(),
            branch: Branch::Zero,
            ambiguous: false,
            alt_value: None,
            error_bar: 0.5 * opts.rc.width(),
        });
    }
    if xi < 0.0 {
        let mut v = rate(&env.reflect(), -xi, &opts.reflected())?;
        v.xi = xi;
        if matches!(v.branch, Branch::Right) {
            v.branch = Branch::Left;
        }
        return Ok(v);
    }
    if xi == b {
        return endpoint(env, xi, opts);
    }

    // the sup over r <= r_c, evaluated just below the bracket
    let r_top = opts.rc.lo - (10.0 * opts.rc.width()).max(1e-9);
    let (lam_top, drift_top) = tilted_state(env, r_top, &opts.u)?;
    let boundary_value = r_top - xi * lam_top;
    let boundary_bar = opts.rc.width() + (opts.rc.lo - r_top);
    if xi <= drift_top {
        let ambiguous = xi > opts.xi_c.lower;
        return Ok(RateValue {
            xi,
            value: boundary_value,
            r_star: r_top,
            branch: Branch::Affine,
            ambiguous,
            alt_value: ambiguous.then_some(boundary_value),
            error_bar: boundary_bar,
        });
    }
    let mut hi = r_top;
    let mut lo = r_top - 1.0;
    let mut step = 1.0;
    loop {
        let (_, d) = tilted_state(env, lo, &opts.u)?;
        if d > xi {
            break;
        }
        hi = lo;
        if lo <= opts.r_floor {
            return Ok(infinite(xi));
        }
        step *= 2.0;
        lo = (lo - step).max(opts.r_floor);
    }
    while hi - lo > opts.r_tol * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        let (_, d) = tilted_state(env, mid, &opts.u)?;
        if d > xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_star = 0.5 * (lo + hi);
    let (lam, _) = tilted_state(env, r_star, &opts.u)?;
    let value = r_star - xi * lam;
    let ambiguous = xi <= opts.xi_c.upper && xi > opts.xi_c.lower;
    Ok(RateValue {
        xi,
        value,
        r_star,
        branch: Branch::Right,
        ambiguous,
        alt_value: ambiguous.then_some(boundary_value),
        error_bar: 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCurve {
    pub samples: Vec<RateValue>,
    pub xi_c: XiC,
    pub xi_bar_c: XiC,
    pub rc: RcEstimate,
    pub i_zero: f64,
}

impl RateCurve {
    /// Largest violation of discrete convexity over consecutive finite values
    /// (grids are assumed uniform).
    pub fn convexity_defect(&self) -> f64 {
        let vals: Vec<f64> = self.samples.iter().map(|s| s.value).filter(|v| v.is_finite()).collect();
        vals.windows(3).map(|w| -(w[0] - 2.0 * w[1] + w[2])).fold(0.0, f64::max)
    }
}

pub fn rate_curve(env: &Environment, grid: &[f64], opts: &RateOptions) -> Result<RateCurve, RateError> {
    let samples = grid.par_iter().map(|&xi| rate(env, xi, opts)).collect::<Result<Vec<_>, _>>()?;
    Ok(RateCurve { samples, xi_c: opts.xi_c, xi_bar_c: opts.xi_bar_c, rc: opts.rc, i_zero: opts.rc.mid() })
}

/// Classical Cramér rate `sup_theta { theta xi - log E e^{theta Z} }` of a
/// single jump law. At the extreme jumps the limit `-log p(z)` is returned;
/// beyond them the value is infinite.
pub fn cramer_oracle(law: &JumpLaw, xi: f64) -> f64 {
    use crate::passage::{log_mgf, log_mgf_slope};
    let support: Vec<i64> = law.iter().filter(|(_, p)| *p > 0.0).map(|(z, _)| z).collect();
    let (zmin, zmax) = (*support.iter().min().unwrap() as f64, *support.iter().max().unwrap() as f64);
    if xi > zmax || xi < zmin {
        return f64::INFINITY;
    }
    if xi == zmax || xi == zmin {
        return -law.prob(xi as i64).ln();
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while log_mgf_slope(law, lo) > xi {
        lo *= 2.0;
    }
    while log_mgf_slope(law, hi) < xi {
        hi *= 2.0;
    }
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        // Newton step, falling back to bisection when it leaves the bracket
        let s = log_mgf_slope(law, theta);
        if s < xi {
            lo = theta;
        } else {
            hi = theta;
        }
        let var = {
            let m = s;
            let top =
                law.iter().filter(|(_, p)| *p > 0.0).map(|(z, p)| p.ln() + theta * z as f64).fold(f64::MIN, f64::max);
            let (mut num, mut den) = (0.0, 0.0);
            for (z, p) in law.iter().filter(|(_, p)| *p > 0.0) {
                let w = (p.ln() + theta * z as f64 - top).exp();
                num += (z as f64 - m).powi(2) * w;
                den += w;
            }
            num / den
        };
        let newton = theta - (s - xi) / var;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - theta).abs() <= 1e-15 * (1.0 + theta.abs()) {
            theta = next;
            break;
        }
        theta = next;
    }
    theta * xi - log_mgf(law, theta)
}

/// Nearest-neighbor symmetry report.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// Site average of `log(p(-1) / p(1))`.
    pub e_log_rho: f64,
    /// `(r, lambda_bar(r) - lambda(r))`.
    pub lambda_gaps: Vec<(f64, f64)>,
    pub max_gap_deviation: f64,
    /// `(xi, I(xi) - I(-xi) - xi E[log rho])`.
    pub identity_residuals: Vec<(f64, f64)>,
    pub max_identity_residual: f64,
}

pub fn symmetry_gap(
    env: &Environment,
    r_grid: &[f64],
    xi_grid: &[f64],
    opts: &RateOptions,
) -> Result<SymmetryReport, RateError> {
    if env.bound() != 1 {
        return Err(RateError::NotNearestNeighbor);
    }
    let e_log_rho = env.site_average(|law| (law.prob(-1) / law.prob(1)).ln());
    let refl = env.reflect();
    let lambda_gaps = r_grid
        .par_iter()
        .map(|&r| Ok((r, lambda(&refl, r, &opts.u)?.value - lambda(env, r, &opts.u)?.value)))
        .collect::<Result<Vec<_>, PassageError>>()?;
    let max_gap_deviation = lambda_gaps.iter().map(|(_, g)| (g - e_log_rho).abs()).fold(0.0, f64::max);
    let identity_residuals = xi_grid
        .par_iter()
        .map(|&xi| {
            let plus = rate(env, xi, opts)?.value;
            let minus = rate(env, -xi, opts)?.value;
            Ok((xi, plus - minus - xi * e_log_rho))
        })
        .collect::<Result<Vec<_>, RateError>>()?;
    let max_identity_residual = identity_residuals.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    Ok(SymmetryReport { e_log_rho, lambda_gaps, max_gap_deviation, identity_residuals, max_identity_residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetryRow {
    pub r: f64,
    pub lambda_poly: f64,
    pub lambda_bar_poly: f64,
    pub lambda_pipeline: f64,
    pub lambda_bar_pipeline: f64,
}

impl AsymmetryRow {
    pub fn gap_poly(&self) -> f64 {
        self.lambda_bar_poly - self.lambda_poly
    }

    pub fn gap_pipeline(&self) -> f64 {
        self.lambda_bar_pipeline - self.lambda_pipeline
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymmetryReport {
    pub rows: Vec<AsymmetryRow>,
    /// `max - min` of `lambda_bar - lambda` across the rows.
    pub variation_poly: f64,
    pub variation_pipeline: f64,
    /// Largest `|pipeline - polynomial|` over both exponents.
    pub max_disagreement: f64,
}

pub const ASYMMETRY_R_VALUES: [f64; 4] = [-0.25, -0.5, -1.0, -2.0];

/// Tabulates `lambda_bar(r) - lambda(r)` for a homogeneous law two ways:
/// from the characteristic roots and from the passage-time pipeline.
pub fn asymmetry_demo(law: &JumpLaw, r_values: &[f64], u: &ULimitOptions) -> Result<AsymmetryReport, RateError> {
    let delta = law.prob(1).min(law.prob(-1));
    let env =
        Environment::homogeneous(law.clone(), delta.min(0.5)).map_err(|e| RateError::BadArgument(e.to_string()))?;
    let refl = env.reflect();
    let rows = r_values
        .iter()
        .map(|&r| {
            let roots = char_poly_roots(law, r)?;
            Ok(AsymmetryRow {
                r,
                lambda_poly: roots.lambda(),
                lambda_bar_poly: roots.lambda_bar(),
                lambda_pipeline: lambda(&env, r, u)?.value,
                lambda_bar_pipeline: lambda(&refl, r, u)?.value,
            })
        })
        .collect::<Result<Vec<_>, PassageError>>()?;
    let spread = |f: &dyn Fn(&AsymmetryRow) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min)
    };
    let variation_poly = spread(&|r| r.gap_poly());
    let variation_pipeline = spread(&|r| r.gap_pipeline());
    let max_disagreement = rows
        .iter()
        .map(|r| (r.lambda_poly - r.lambda_pipeline).abs().max((r.lambda_bar_poly - r.lambda_bar_pipeline).abs()))
        .fold(0.0, f64::max);
    Ok(AsymmetryReport { rows, variation_poly, variation_pipeline, max_disagreement })
}
