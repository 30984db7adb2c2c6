//! Tilted kernels, their invariant densities, correctors and the
//! pair measures they induce.
//!
//! For `r` below the critical value the tilted kernel
//! `k(x, z) = p_x(z) e^r u_r(x, z)` is a Doob transform of the original walk
//! and moves right ballistically with speed `1 / lambda'(r)`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::environment::{offset_index, offsets, Environment};
use crate::level2::{entropy, Level2Error, PairMeasure};
use crate::linalg::{stationary_distribution, BandMatrix};
use crate::passage::{lambda, u_limit_periodic, PassageError, ULimit, ULimitOptions};

/// Row-sum defect above which `u` is considered under-converged.
pub const ROW_SUM_ERROR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TiltError {
    #[error(transparent)]
    Passage(#[from] PassageError),
    #[error(transparent)]
    Level2(#[from] Level2Error),
    #[error("row-sum defect {defect:e} at site {site}: u is stale or under-converged")]
    StaleU { site: i64, defect: f64 },
    #[error("operation needs a periodic or homogeneous environment")]
    NotPeriodic,
    #[error("projected chain is singular")]
    Singular,
    #[error("tilted drift {0} is not positive")]
    NotBallistic(f64),
    #[error("occupation limit did not settle: last change {change:e} at start {x_start}")]
    OccupationNotConverged { x_start: i64, change: f64, last: Vec<f64>, previous: Vec<f64> },
    #[error("kernel rows do not cover site {0}")]
    KernelRange(i64),
    #[error("corrector check '{check}' fails at site {site}: {value:e}")]
    Inconsistent { check: &'static str, site: i64, value: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltedKernel {
    pub r: f64,
    pub bound: usize,
    pub site_lo: i64,
    pub site_hi: i64,
    pub period: Option<usize>,
    probs: Vec<f64>,
    /// `max_x |sum_z k(x, z) - 1|`.
    pub row_sum_defect: f64,
    /// `(delta e^r)^2`, the guaranteed lower bound on `k(x, +-1)`.
    pub ellipticity_floor: f64,
    /// Observed `min_x min(k(x, 1), k(x, -1))`.
    pub min_nearest: f64,
}

impl TiltedKernel {
    fn index(&self, x: i64) -> Option<i64> {
        let x = match self.period {
            Some(l) => self.site_lo + (x - self.site_lo).rem_euclid(l as i64),
            None => x,
        };
        (self.site_lo..=self.site_hi).contains(&x).then_some(x - self.site_lo)
    }

    /// Row `k(x, .)` in offset storage order.
    pub fn row(&self, x: i64) -> Option<&[f64]> {
        let w = 2 * self.bound;
        self.index(x).map(|i| &self.probs[i as usize * w..(i as usize + 1) * w])
    }

    pub fn prob(&self, x: i64, z: i64) -> f64 {
        self.row(x).map_or(0.0, |row| row[offset_index(self.bound, z)])
    }

    /// Rows are available for every site (periodic kernels).
    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }
}

/// Builds `k(x, z) = p_x(z) e^r u(x, z)` on the sites stored in `u`. Rows are
/// not renormalized; their defect is reported and must stay below
/// [`ROW_SUM_ERROR`].
pub fn tilt_kernel(env: &Environment, u: &ULimit) -> Result<TiltedKernel, TiltError> {
    let b = env.bound();
    let r = u.r;
    let mut probs = Vec::with_capacity(u.sites().count() * 2 * b);
    let mut defect: f64 = 0.0;
    let mut min_nearest = f64::INFINITY;
    for x in u.sites() {
        let law = env.law_at(x).map_err(PassageError::from)?;
        let row: Vec<f64> =
            law.iter().map(|(z, p)| if p > 0.0 { (p.ln() + r + u.log_u(x, z)).exp() } else { 0.0 }).collect();
        let d = (row.iter().sum::<f64>() - 1.0).abs();
        if d > ROW_SUM_ERROR {
            return Err(TiltError::StaleU { site: x, defect: d });
        }
        defect = defect.max(d);
        min_nearest = min_nearest.min(row[offset_index(b, 1)]).min(row[offset_index(b, -1)]);
        probs.extend(row);
    }
    Ok(TiltedKernel {
        r,
        bound: b,
        site_lo: u.site_lo,
        site_hi: u.site_hi,
        period: u.period,
        probs,
        row_sum_defect: defect,
        ellipticity_floor: (env.delta() * r.exp()).powi(2),
        min_nearest,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    PeriodicExact,
    /// Expected occupation from a far-left start, on the target sites.
    Occupation {
        tol: f64,
        targets: Option<(i64, i64)>,
        max_start: i64,
    },
}

impl DensityMode {
    pub fn occupation(tol: f64) -> Self {
        Self::Occupation { tol, targets: None, max_start: 1 << 16 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantDensity {
    pub site_lo: i64,
    /// Density with respect to the uniform measure on the target sites
    /// (mean one).
    pub phi: Vec<f64>,
    /// Expected visits from far left; its mean is `lambda'(r)`.
    pub raw: Vec<f64>,
    /// Mean of `raw`.
    pub normalization: f64,
    /// `max_x |sum_z phi(x - z) k(x - z, z) - phi(x)|` (interior sites).
    pub residual: f64,
    /// Drift `sum phi(x) k(x, z) z / sum phi` under the density.
    pub drift: f64,
    /// Far-left start used by the occupation mode.
    pub x_start: Option<i64>,
}

impl InvariantDensity {
    pub fn phi_at(&self, x: i64) -> f64 {
        let l = self.phi.len() as i64;
        self.phi[(x - self.site_lo).rem_euclid(l) as usize]
    }
}

fn density_drift(kernel: &TiltedKernel, lo: i64, phi: &[f64]) -> f64 {
    let total: f64 = phi.iter().sum();
    phi.iter()
        .enumerate()
        .map(|(i, f)| {
            let row = kernel.row(lo + i as i64).expect("target rows");
            f * offsets(kernel.bound).zip(row).map(|(z, k)| z as f64 * k).sum::<f64>()
        })
        .sum::<f64>()
        / total
}

/// Invariance defect with periodic wraparound (`periodic`) or on interior
/// sites only.
fn invariance_residual(kernel: &TiltedKernel, lo: i64, phi: &[f64], periodic: bool) -> f64 {
    let n = phi.len() as i64;
    let b = kernel.bound as i64;
    let at = |x: i64| -> Option<f64> {
        if periodic {
            Some(phi[(x - lo).rem_euclid(n) as usize])
        } else {
            (lo..lo + n).contains(&x).then(|| phi[(x - lo) as usize])
        }
    };
    let (first, last) = if periodic { (lo, lo + n - 1) } else { (lo + b, lo + n - 1 - b) };
    let mut worst: f64 = 0.0;
    for x in first..=last {
        let mut s = 0.0;
        for z in offsets(kernel.bound) {
            s += at(x - z).unwrap() * kernel.prob(x - z, z);
        }
        worst = worst.max((s - at(x).unwrap()).abs());
    }
    worst
}

fn projected_chain(kernel: &TiltedKernel, l: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(l, l);
    for i in 0..l {
        for z in offsets(kernel.bound) {
            let j = (i as i64 + z).rem_euclid(l as i64) as usize;
            p[(i, j)] += kernel.prob(i as i64, z);
        }
    }
    p
}

fn occupation_solve(kernel: &TiltedKernel, x_start: i64, lo: i64, hi: i64) -> Result<Vec<f64>, TiltError> {
    let reach = lo - x_start;
    let kill_lo = x_start - reach;
    let kill_hi = hi + reach;
    let n = (kill_hi - kill_lo + 1) as usize;
    let b = kernel.bound;
    // (I - Q)^T g = e_start, with Q the kernel killed outside [kill_lo, kill_hi]
    let mut a = BandMatrix::zeros(n, b, b);
    for i in 0..n {
        let x = kill_lo + i as i64;
        a.add(i, i, 1.0);
        let row = kernel.row(x).ok_or(TiltError::KernelRange(x))?;
        for (z, k) in offsets(b).zip(row) {
            let j = i as i64 + z;
            if (0..n as i64).contains(&j) {
                a.add(j as usize, i, -k);
            }
        }
    }
    let mut rhs = vec![0.0; n];
    rhs[(x_start - kill_lo) as usize] = 1.0;
    let g = a.solve(&rhs).ok_or(TiltError::Singular)?;
    Ok(g[(lo - kill_lo) as usize..=(hi - kill_lo) as usize].to_vec())
}

pub fn invariant_density(kernel: &TiltedKernel, mode: DensityMode) -> Result<InvariantDensity, TiltError> {
    match mode {
        DensityMode::PeriodicExact => {
            let l = kernel.period.ok_or(TiltError::NotPeriodic)?;
            let pi = stationary_distribution(&projected_chain(kernel, l)).ok_or(TiltError::Singular)?;
            let phi: Vec<f64> = pi.iter().map(|p| p * l as f64).collect();
            let drift = density_drift(kernel, 0, &phi);
            if !(drift > 0.0) {
                return Err(TiltError::NotBallistic(drift));
            }
            let raw: Vec<f64> = phi.iter().map(|f| f / drift).collect();
            let residual = invariance_residual(kernel, 0, &phi, true);
            Ok(InvariantDensity { site_lo: 0, normalization: 1.0 / drift, phi, raw, residual, drift, x_start: None })
        }
        DensityMode::Occupation { tol, targets, max_start } => {
            let (lo, hi) = match (targets, kernel.period) {
                (Some(t), _) => t,
                (None, Some(l)) => (0, l as i64 - 1),
                (None, None) => {
                    let mid = (kernel.site_lo + kernel.site_hi) / 2;
                    let q = (kernel.site_hi - kernel.site_lo) / 8;
                    (mid - q, mid + q)
                }
            };
            let mut dist = 16;
            let mut prev: Option<Vec<f64>> = None;
            loop {
                let x_start = lo - dist;
                let raw = occupation_solve(kernel, x_start, lo, hi)?;
                if let Some(p) = &prev {
                    let scale = raw.iter().copied().fold(0.0, f64::max);
                    let change = raw.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if change <= tol * scale {
                        let normalization = raw.iter().sum::<f64>() / raw.len() as f64;
                        let phi: Vec<f64> = raw.iter().map(|g| g / normalization).collect();
                        let periodic = kernel.period.is_some_and(|l| hi - lo + 1 == l as i64);
                        let residual = invariance_residual(kernel, lo, &phi, periodic);
                        let drift = density_drift(kernel, lo, &phi);
                        return Ok(InvariantDensity {
                            site_lo: lo,
                            phi,
                            raw,
                            normalization,
                            residual,
                            drift,
                            x_start: Some(x_start),
                        });
                    }
                    if dist >= max_start {
                        return Err(TiltError::OccupationNotConverged {
                            x_start,
                            change,
                            last: raw,
                            previous: p.clone(),
                        });
                    }
                }
                prev = Some(raw);
                dist *= 2;
            }
        }
    }
}

/// `F(x, z) = log u(x, z) + z lambda` with its consistency checks.
#[derive(Debug, Clone, Serialize)]
pub struct Corrector {
    pub r: f64,
    pub lambda: f64,
    pub bound: usize,
    pub site_lo: i64,
    pub site_hi: i64,
    pub period: Option<usize>,
    values: Vec<f64>,
    /// `B (-log(delta e^r) + |lambda|)`.
    pub moment_bound: f64,
    pub max_abs: f64,
    /// `max |F(x, z) + F(x + z, -z)|`.
    pub antisymmetry: f64,
    /// `max_z |mean over one period of F(., z)|` (periodic only).
    pub mean_defect: Option<f64>,
    /// `max |F(x, z + z') - F(x, z) - F(x + z, z')|` over stored triples.
    pub cocycle: f64,
    /// `|sum_{i < L} F(i, 1)|`, the period loop (periodic only).
    pub loop_sum: Option<f64>,
}

impl Corrector {
    pub fn get(&self, x: i64, z: i64) -> Option<f64> {
        if z == 0 || z.unsigned_abs() as usize > self.bound {
            return None;
        }
        let x = match self.period {
            Some(l) => self.site_lo + (x - self.site_lo).rem_euclid(l as i64),
            None => x,
        };
        (self.site_lo..=self.site_hi)
            .contains(&x)
            .then(|| self.values[(x - self.site_lo) as usize * 2 * self.bound + offset_index(self.bound, z)])
    }

    pub fn at(&self, x: i64, z: i64) -> f64 {
        self.get(x, z).unwrap_or_else(|| panic!("F({x}, {z}) not stored"))
    }

    /// `F(0, y) = sum_{0 <= i < y} F(i, 1)` (with the mirrored sum for
    /// `y < 0`), the additive extension along unit steps.
    pub fn potential(&self, y: i64) -> f64 {
        if y >= 0 {
            (0..y).map(|i| self.at(i, 1)).sum()
        } else {
            (y..0).map(|i| -self.at(i, 1)).sum()
        }
    }

    /// `max_{0 <= y < L} |F(0, y)|` for periodic correctors.
    pub fn potential_range(&self) -> Option<f64> {
        self.period.map(|l| (0..l as i64).map(|y| self.potential(y).abs()).fold(0.0, f64::max))
    }
}

/// Checks tolerance for the corrector's exact identities.
pub const CORRECTOR_TOL: f64 = 1e-8;

pub fn corrector(env: &Environment, u: &ULimit, lambda_val: f64) -> Result<Corrector, TiltError> {
    let b = env.bound();
    let r = u.r;
    let mut values = Vec::new();
    for x in u.sites() {
        values.extend(offsets(b).map(|z| u.log_u(x, z) + z as f64 * lambda_val));
    }
    let moment_bound = b as f64 * (-(env.delta() * r.exp()).ln() + lambda_val.abs());
    let mut c = Corrector {
        r,
        lambda: lambda_val,
        bound: b,
        site_lo: u.site_lo,
        site_hi: u.site_hi,
        period: u.period,
        max_abs: values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        values,
        moment_bound,
        antisymmetry: 0.0,
        mean_defect: None,
        cocycle: 0.0,
        loop_sum: None,
    };
    let bi = b as i64;
    let mut worst_site = (0i64, 0.0f64);
    for x in u.sites() {
        for z in offsets(b) {
            if let Some(back) = c.get(x + z, -z) {
                let d = (c.at(x, z) + back).abs();
                if d > c.antisymmetry {
                    c.antisymmetry = d;
                    worst_site = (x, d);
                }
            }
            for z2 in offsets(b) {
                let s = z + z2;
                if s == 0 || s.abs() > bi {
                    continue;
                }
                if let Some(step) = c.get(x + z, z2) {
                    c.cocycle = c.cocycle.max((c.at(x, s) - c.at(x, z) - step).abs());
                }
            }
        }
    }
    if c.antisymmetry > CORRECTOR_TOL {
        return Err(TiltError::Inconsistent { check: "antisymmetry", site: worst_site.0, value: worst_site.1 });
    }
    if c.cocycle > CORRECTOR_TOL {
        return Err(TiltError::Inconsistent { check: "cocycle", site: u.site_lo, value: c.cocycle });
    }
    if c.max_abs > c.moment_bound * (1.0 + 1e-12) {
        return Err(TiltError::Inconsistent { check: "moment bound", site: u.site_lo, value: c.max_abs });
    }
    if let Some(l) = c.period {
        let l = l as i64;
        let mean_defect =
            offsets(b).map(|z| ((0..l).map(|i| c.at(i, z)).sum::<f64>() / l as f64).abs()).fold(0.0, f64::max);
        let loop_sum = (0..l).map(|i| c.at(i, 1)).sum::<f64>().abs();
        c.mean_defect = Some(mean_defect);
        c.loop_sum = Some(loop_sum);
        if mean_defect > CORRECTOR_TOL {
            return Err(TiltError::Inconsistent { check: "mean zero", site: 0, value: mean_defect });
        }
        if loop_sum > CORRECTOR_TOL {
            return Err(TiltError::Inconsistent { check: "period loop", site: 0, value: loop_sum });
        }
    }
    Ok(c)
}

/// The candidate minimizer `mu(i, z) = phi(i) k(i, z) / L` at tilt `r`.
#[derive(Debug, Clone, Serialize)]
pub struct AnsatzMeasure {
    pub r: f64,
    pub lambda: f64,
    pub measure: PairMeasure,
    pub xi: f64,
    pub stationarity_residual: f64,
    pub kernel: TiltedKernel,
    pub density: InvariantDensity,
}

impl AnsatzMeasure {
    /// `r - xi lambda(r)`, the value the entropy must take.
    pub fn predicted_entropy(&self) -> f64 {
        self.r - self.xi * self.lambda
    }

    pub fn entropy(&self, env: &Environment) -> Result<f64, Level2Error> {
        entropy(&self.measure, env)
    }
}

pub fn ansatz_measure(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<AnsatzMeasure, TiltError> {
    let l = env.period().ok_or(TiltError::NotPeriodic)?;
    let u = u_limit_periodic(env, r, opts)?;
    let lam = lambda_from_u(&u);
    let kernel = tilt_kernel(env, &u)?;
    let density = invariant_density(&kernel, DensityMode::PeriodicExact)?;
    let measure = PairMeasure::from_fn(l, env.bound(), |i, z| density.phi[i] * kernel.prob(i as i64, z) / l as f64)?;
    let stationarity_residual = measure.marginals().stationarity_residual;
    Ok(AnsatzMeasure { r, lambda: lam, xi: measure.drift(), measure, stationarity_residual, kernel, density })
}

/// `-mean log u(., 1)` over the stored sites.
pub(crate) fn lambda_from_u(u: &ULimit) -> f64 {
    -u.sites().map(|x| u.log_u(x, 1)).sum::<f64>() / u.sites().count() as f64
}

/// Drift of the tilted stationary chain; equals `1 / lambda'(r)`.
pub fn tilted_drift(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<f64, TiltError> {
    let u = u_limit_periodic(env, r, opts)?;
    let kernel = tilt_kernel(env, &u)?;
    Ok(invariant_density(&kernel, DensityMode::PeriodicExact)?.drift)
}

/// Row of the tilt report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltReport {
    pub r: f64,
    pub lambda: f64,
    pub xi: f64,
    pub row_sum_defect: f64,
    pub invariance_residual: f64,
    pub ellipticity_floor: f64,
}

pub fn tilt_report(env: &Environment, r: f64, opts: &ULimitOptions) -> Result<TiltReport, TiltError> {
    let a = ansatz_measure(env, r, opts)?;
    let lam = lambda(env, r, opts)?;
    Ok(TiltReport {
        r,
        lambda: lam.value,
        xi: a.xi,
        row_sum_defect: a.kernel.row_sum_defect,
        invariance_residual: a.density.residual,
        ellipticity_floor: a.kernel.ellipticity_floor,
    })
}
