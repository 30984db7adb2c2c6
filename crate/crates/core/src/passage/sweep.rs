//! Exact solution of the truncated passage problem by a forward block sweep,
//! and the limits `u_r` and `zeta` built on it.
//!
//! On `[-M, n)` the harmonic equation is banded. Writing
//! `H_y = (h(y), ..., h(y + B - 1))`, the values just below `y` satisfy
//! `(h(y - B), ..., h(y - 1)) = G_y H_y` with `G_{-M} = 0`, and eliminating
//! `h(y)` gives `h(y) = sum_{k=1..B} d_y[k] h(y + k)`. The forward pass builds
//! the `d_y`; the backward pass starts from `h = 1` on `[n, n + B)` and
//! records the unit steps of `log h`. All coefficients are nonnegative, so nothing cancels,
//! and a nonpositive pivot `1 - c_0` means the truncated system is
//! supercritical.

use serde::Serialize;

use super::mgf::{weights, VALUE_CAP};
use super::{contraction_rate, PassageError};
use crate::environment::{offset_index, offsets, EnvKind, Environment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ULimitOptions {
    /// Stop once `max |log u_N - log u_{N/2}|` is below this twice in a row.
    pub tol: f64,
    pub n_start: i64,
    pub n_max: i64,
}

impl Default for ULimitOptions {
    fn default() -> Self {
        Self { tol: 1e-12, n_start: 32, n_max: 1 << 20 }
    }
}

/// Truncated solution on `[-M, n + B)`, stored as unit steps
/// `log h(x) - log h(x + 1)`. Differences of `log h` itself would lose
/// digits once `|log h|` grows like `lambda N`.
pub(crate) struct Truncated {
    m: i64,
    steps: Vec<f64>,
}

impl Truncated {
    /// `log h(y) - log h(x)`.
    pub(crate) fn log_ratio(&self, x: i64, y: i64) -> f64 {
        let (i, j) = ((x + self.m) as usize, (y + self.m) as usize);
        if j >= i {
            -self.steps[i..j].iter().sum::<f64>()
        } else {
            self.steps[j..i].iter().sum::<f64>()
        }
    }
}

pub(crate) fn solve_truncated(env: &Environment, r: f64, n: i64, m: i64) -> Result<Truncated, PassageError> {
    let b = env.bound();
    let w = weights(env, r, -m, n - 1)?;
    let sites = (n + m) as usize;
    let mut g = vec![0.0; b * b];
    let mut g_next = vec![0.0; b * b];
    let mut c = vec![0.0; b];
    let mut d_all = vec![0.0; sites * b];
    for s in 0..sites {
        let row = &w[s * 2 * b..(s + 1) * 2 * b];
        // c_j = sum_{z=1..B} p(-z) e^r G[B - z][j]
        for (j, cj) in c.iter_mut().enumerate() {
            *cj = (1..=b).map(|z| row[offset_index(b, -(z as i64))] * g[(b - z) * b + j]).sum();
        }
        let denom = 1.0 - c[0];
        if !(denom > 0.0) {
            return Err(PassageError::Supercritical {
                r,
                detail: format!("nonpositive pivot at site {} (n = {n}, M = {m})", s as i64 - m),
            });
        }
        let d = &mut d_all[s * b..(s + 1) * b];
        for k in 1..=b {
            let ck = if k < b { c[k] } else { 0.0 };
            d[k - 1] = (ck + row[offset_index(b, k as i64)]) / denom;
        }
        for i in 0..b {
            for j in 0..b {
                g_next[i * b + j] = if i + 1 < b {
                    let carry = if j + 1 < b { g[(i + 1) * b + j + 1] } else { 0.0 };
                    g[(i + 1) * b] * d[j] + carry
                } else {
                    d[j]
                };
            }
        }
        std::mem::swap(&mut g, &mut g_next);
        if g.iter().any(|v| !(v.is_finite() && *v <= VALUE_CAP)) {
            return Err(PassageError::Supercritical {
                r,
                detail: format!("coefficients exceed {VALUE_CAP:e} at site {}", s as i64 - m),
            });
        }
    }
    let mut steps = vec![0.0f64; sites + b];
    for s in (0..sites).rev() {
        let d = &d_all[s * b..(s + 1) * b];
        // h(s + k) / h(s + 1) from the steps already computed
        let mut rel = 0.0;
        let mut sum = 0.0;
        for k in 1..=b {
            if k > 1 {
                rel -= steps[s + k - 1];
            }
            sum += d[k - 1] * rel.exp();
        }
        if !(sum > 0.0) {
            return Err(PassageError::Supercritical { r, detail: format!("h vanishes at site {}", s as i64 - m) });
        }
        steps[s] = sum.ln();
    }
    Ok(Truncated { m, steps })
}

/// Limiting ratios `u_r(x, z)` for `x` in a site range and every offset.
#[derive(Debug, Clone, Serialize)]
pub struct ULimit {
    pub r: f64,
    pub bound: usize,
    pub site_lo: i64,
    pub site_hi: i64,
    /// Set when the range is one full period of a periodic environment, in
    /// which case lookups wrap.
    pub period: Option<usize>,
    log_u: Vec<f64>,
    /// Final right level `n` and left depth `M`.
    pub n_used: i64,
    pub m_used: i64,
    /// Last observed change of `log u` between successive truncations.
    pub cauchy_gap: f64,
    /// Geometric rate `(1 - (delta e^r)^{2B})^{1/B}` from the Cauchy estimate.
    pub certificate: f64,
    pub converged: bool,
}

impl ULimit {
    fn index(&self, x: i64, z: i64) -> Option<usize> {
        if z == 0 || z.unsigned_abs() as usize > self.bound {
            return None;
        }
        let x = match self.period {
            Some(l) => self.site_lo + (x - self.site_lo).rem_euclid(l as i64),
            None => x,
        };
        if x < self.site_lo || x > self.site_hi {
            return None;
        }
        Some((x - self.site_lo) as usize * 2 * self.bound + offset_index(self.bound, z))
    }

    pub fn get_log(&self, x: i64, z: i64) -> Option<f64> {
        self.index(x, z).map(|i| self.log_u[i])
    }

    /// `log u(x, z)`; panics if `(x, z)` is not stored.
    pub fn log_u(&self, x: i64, z: i64) -> f64 {
        self.get_log(x, z)
            .unwrap_or_else(|| panic!("u({x}, {z}) outside stored range [{}, {}]", self.site_lo, self.site_hi))
    }

    pub fn u(&self, x: i64, z: i64) -> f64 {
        self.log_u(x, z).exp()
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<i64> {
        self.site_lo..=self.site_hi
    }
}

fn collect_log_u(t: &Truncated, lo: i64, hi: i64, bound: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((hi - lo + 1) as usize * 2 * bound);
    for x in lo..=hi {
        out.extend(offsets(bound).map(|z| t.log_ratio(x, x + z)));
    }
    out
}

/// Increases the truncation `N` (right level `hi + B + N`, left depth
/// `B - lo + N`) by doubling until `log u` on `[lo, hi]` stabilizes. Sampled
/// windows cap the truncation at the window edge; the result then carries
/// `converged = false` if the last change was still above `tol`.
pub fn u_limit(
    env: &Environment,
    r: f64,
    site_range: (i64, i64),
    opts: &ULimitOptions,
) -> Result<ULimit, PassageError> {
    let (lo, hi) = site_range;
    if lo > hi {
        return Err(PassageError::BadArgument(format!("empty site range [{lo}, {hi}]")));
    }
    if !r.is_finite() {
        return Err(PassageError::BadArgument("r must be finite".into()));
    }
    let bound = env.bound();
    let b = bound as i64;
    let window = env.window();
    if let Some((wlo, whi)) = window {
        if lo - b < wlo || hi + b > whi {
            return Err(PassageError::BadArgument(format!(
                "site range [{lo}, {hi}] too close to window [{wlo}, {whi}]"
            )));
        }
    }
    let period = match env.period() {
        Some(l) if lo == 0 && hi == l as i64 - 1 => Some(l),
        _ => None,
    };
    let mut ext = opts.n_start.max(1);
    let mut prev: Option<Vec<f64>> = None;
    let mut small = 0;
    let mut gap = f64::INFINITY;
    loop {
        let mut n = hi + b + ext;
        let mut m = b - lo + ext;
        let mut capped = false;
        if let Some((wlo, whi)) = window {
            if n > whi + 1 {
                n = whi + 1;
                capped = true;
            }
            if m > -wlo {
                m = -wlo;
                capped = true;
            }
        }
        let t = solve_truncated(env, r, n, m)?;
        let cur = collect_log_u(&t, lo, hi, bound);
        if let Some(p) = &prev {
            gap = p.iter().zip(&cur).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
            small = if gap < opts.tol { small + 1 } else { 0 };
        }
        let done = small >= 2 || ((capped || ext >= opts.n_max) && small >= 1);
        if done || capped || ext >= opts.n_max {
            if !done && !capped {
                return Err(PassageError::SlowConvergence { r, gap, n_used: n });
            }
            return Ok(ULimit {
                r,
                bound,
                site_lo: lo,
                site_hi: hi,
                period,
                log_u: cur,
                n_used: n,
                m_used: m,
                cauchy_gap: gap,
                certificate: contraction_rate(env.delta(), r, bound),
                converged: done,
            });
        }
        prev = Some(cur);
        ext *= 2;
    }
}

/// `u_limit` over one period `[0, L)` of a periodic or homogeneous
/// environment.
pub fn u_limit_periodic(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<ULimit, PassageError> {
    let l = env.period().ok_or_else(|| PassageError::BadArgument("environment is not periodic".into()))?;
    u_limit(env, r, (0, l as i64 - 1), opts)
}

/// One-step passage generating functions `zeta(x) = E_x[exp(r tau_{x+1})]`
/// of a nearest-neighbor environment.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaNn {
    pub r: f64,
    pub site_lo: i64,
    pub site_hi: i64,
    pub zeta: Vec<f64>,
    /// Largest defect of `1 = p(1) e^r / zeta(x) + p(-1) e^r zeta(x - 1)`.
    pub residual: f64,
    /// Change from moving the left seed halfway in (sampled windows only).
    pub seed_gap: f64,
}

impl ZetaNn {
    pub fn at(&self, x: i64) -> f64 {
        self.zeta[(x - self.site_lo) as usize]
    }
}

fn step(a: f64, b: f64, prev: f64) -> Option<f64> {
    let den = 1.0 - b * prev;
    (den > 0.0).then(|| a / den)
}

/// Solves `zeta(x) = p_x(1) e^r / (1 - p_x(-1) e^r zeta(x - 1))`.
///
/// Periodic environments compose the `L` Moebius maps of one period and take
/// the smallest nonnegative fixed point (the limit of the iteration started
/// from 0); sampled windows run the recursion from `zeta = 0` at the left
/// window edge. The site range is `[0, L)` for periodic environments.
pub fn zeta_nn(env: &Environment, r: f64, site_range: Option<(i64, i64)>) -> Result<ZetaNn, PassageError> {
    if env.bound() != 1 {
        return Err(PassageError::NotNearestNeighbor(env.bound()));
    }
    let er = r.exp();
    let coeffs = |x: i64| -> Result<(f64, f64), PassageError> {
        let law = env.law_at(x)?;
        Ok((law.prob(1) * er, law.prob(-1) * er))
    };
    let supercritical = |detail: String| PassageError::Supercritical { r, detail };
    match env.kind() {
        EnvKind::Homogeneous(_) | EnvKind::Periodic(_) => {
            let l = env.period().unwrap() as i64;
            // (num, den) transforms as [[0, a], [-b, 1]]
            let mut mat = [1.0, 0.0, 0.0, 1.0];
            for x in 0..l {
                let (a, b) = coeffs(x)?;
                let [p, q, s, t] = mat;
                let next = [0.0 * p + a * s, 0.0 * q + a * t, -b * p + s, -b * q + t];
                let scale = next.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
                mat = next.map(|v| v / scale);
            }
            let [al, be, ga, de] = mat;
            // fixed point of (al z + be) / (ga z + de)
            let qa = ga;
            let qb = de - al;
            let qc = -be;
            let mut roots = Vec::new();
            if qa.abs() < 1e-300 {
                if qb != 0.0 {
                    roots.push(-qc / qb);
                }
            } else {
                let disc = qb * qb - 4.0 * qa * qc;
                if disc < 0.0 {
                    return Err(supercritical(format!("no real fixed point (discriminant {disc:e})")));
                }
                let qq = -0.5 * (qb + qb.signum() * disc.sqrt());
                if qq != 0.0 {
                    roots.push(qq / qa);
                    roots.push(qc / qq);
                } else {
                    roots.push(0.0);
                }
            }
            let start = roots.into_iter().filter(|z| *z >= 0.0 && z.is_finite()).fold(f64::INFINITY, f64::min);
            if !start.is_finite() {
                return Err(supercritical("no nonnegative fixed point".into()));
            }
            let mut zeta = Vec::with_capacity(l as usize);
            let mut prev = start;
            for x in 0..l {
                let (a, b) = coeffs(x)?;
                prev = step(a, b, prev).ok_or_else(|| supercritical(format!("pole at site {x}")))?;
                zeta.push(prev);
            }
            let mut residual: f64 = 0.0;
            for x in 0..l {
                let (a, b) = coeffs(x)?;
                let left = zeta[(x - 1).rem_euclid(l) as usize];
                residual = residual.max((a / zeta[x as usize] + b * left - 1.0).abs());
            }
            if let Some((lo, hi)) = site_range {
                if (lo, hi) != (0, l - 1) {
                    let zeta = (lo..=hi).map(|x| zeta[x.rem_euclid(l) as usize]).collect();
                    return Ok(ZetaNn { r, site_lo: lo, site_hi: hi, zeta, residual, seed_gap: 0.0 });
                }
            }
            Ok(ZetaNn { r, site_lo: 0, site_hi: l - 1, zeta, residual, seed_gap: 0.0 })
        }
        EnvKind::SampledWindow { .. } => {
            let (wlo, _) = env.window().unwrap();
            let (lo, hi) =
                site_range.ok_or_else(|| PassageError::BadArgument("sampled window needs a site range".into()))?;
            let run = |seed_site: i64| -> Result<Vec<f64>, PassageError> {
                let mut prev = 0.0;
                let mut out = Vec::new();
                for x in seed_site..=hi {
                    let (a, b) = coeffs(x)?;
                    prev = step(a, b, prev).ok_or_else(|| supercritical(format!("pole at site {x}")))?;
                    if x >= lo {
                        out.push(prev);
                    }
                }
                Ok(out)
            };
            let zeta = run(wlo)?;
            let alt = run((wlo + lo) / 2)?;
            let seed_gap = zeta.iter().zip(&alt).map(|(a, b)| (a.ln() - b.ln()).abs()).fold(0.0, f64::max);
            let mut residual: f64 = 0.0;
            for x in lo + 1..=hi {
                let (a, b) = coeffs(x)?;
                let (zx, zl) = (zeta[(x - lo) as usize], zeta[(x - 1 - lo) as usize]);
                residual = residual.max((a / zx + b * zl - 1.0).abs());
            }
            Ok(ZetaNn { r, site_lo: lo, site_hi: hi, zeta, residual, seed_gap })
        }
    }
}
