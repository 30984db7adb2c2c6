//! Pair measures on `(site class, jump)` and the level-2 entropy.
//!
//! A pair measure `w(i, z)` lives on `{0, ..., L-1} x offsets`. Its first
//! marginal is `m1(i) = sum_z w(i, z)`, its second `m2(i) = sum_z w(i - z, z)`
//! (site classes mod `L`), and it is stationary when the two agree. The
//! entropy is the conditional relative entropy
//! `sum w log(w / (m1 p))` against the environment's jump laws.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::environment::{offset_index, offsets, Environment, JumpLaw};
use crate::linalg::stationary_distribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Level2Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("level-2 objects need a periodic or homogeneous environment")]
    NotPeriodic,
    #[error("drift {xi} is infeasible: {reason}")]
    Infeasible { xi: f64, reason: String },
    #[error("path has no steps")]
    EmptyPath,
    #[error("path step {step} has jump {jump} outside the offset set")]
    BadStep { step: usize, jump: i64 },
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("linear algebra failure: {0}")]
    Singular(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMeasure {
    period: usize,
    bound: usize,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marginals {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    /// `max_i |m1(i) - m2(i)|`.
    pub stationarity_residual: f64,
}

impl PairMeasure {
    /// Weights in row-major `(site class, offset slot)` order.
    pub fn new(period: usize, bound: usize, weights: Vec<f64>) -> Result<Self, Level2Error> {
        if period == 0 || bound == 0 {
            return Err(Level2Error::Shape("period and bound must be positive".into()));
        }
        if weights.len() != period * 2 * bound {
            return Err(Level2Error::Shape(format!("expected {} weights, got {}", period * 2 * bound, weights.len())));
        }
        if let Some(v) = weights.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Level2Error::BadWeights(format!("weight {v} is not finite and nonnegative")));
        }
        Ok(Self { period, bound, weights })
    }

    pub fn from_fn(period: usize, bound: usize, f: impl Fn(usize, i64) -> f64) -> Result<Self, Level2Error> {
        let weights = (0..period).flat_map(|i| offsets(bound).map(move |z| (i, z))).map(|(i, z)| f(i, z)).collect();
        Self::new(period, bound, weights)
    }

    /// `w(i, z) = s(i) p_i(z)` for site weights `s`.
    pub fn from_laws(env: &Environment, site_weights: &[f64]) -> Result<Self, Level2Error> {
        let laws = period_laws(env, site_weights.len())?;
        Self::from_fn(site_weights.len(), env.bound(), |i, z| site_weights[i] * laws[i].prob(z))
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize, z: i64) -> f64 {
        self.weights[i * 2 * self.bound + offset_index(self.bound, z)]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, f64)> + '_ {
        let b = self.bound;
        (0..self.period)
            .flat_map(move |i| offsets(b).map(move |z| (i, z)))
            .zip(self.weights.iter().copied())
            .map(|((i, z), w)| (i, z, w))
    }

    pub fn marginals(&self) -> Marginals {
        let l = self.period as i64;
        let mut m1 = vec![0.0; self.period];
        let mut m2 = vec![0.0; self.period];
        for (i, z, w) in self.iter() {
            m1[i] += w;
            m2[(i as i64 + z).rem_euclid(l) as usize] += w;
        }
        let stationarity_residual = m1.iter().zip(&m2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Marginals { m1, m2, stationarity_residual }
    }

    /// Mean jump `sum w(i, z) z`.
    pub fn drift(&self) -> f64 {
        self.iter().map(|(_, z, w)| w * z as f64).sum()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        assert_eq!(self.weights.len(), other.weights.len());
        0.5 * self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    /// Same measure viewed with site classes relabeled `i -> i + shift`.
    pub fn shifted(&self, shift: usize) -> Self {
        let l = self.period;
        let w = 2 * self.bound;
        let mut weights = vec![0.0; self.weights.len()];
        for i in 0..l {
            let j = (i + shift) % l;
            weights[j * w..(j + 1) * w].copy_from_slice(&self.weights[i * w..(i + 1) * w]);
        }
        Self { period: l, bound: self.bound, weights }
    }
}

/// Laws of site classes `0..period`; the environment's period must divide it.
fn period_laws(env: &Environment, period: usize) -> Result<Vec<JumpLaw>, Level2Error> {
    let l = env.period().ok_or(Level2Error::NotPeriodic)?;
    if period == 0 || !period.is_multiple_of(l) {
        return Err(Level2Error::Shape(format!("measure period {period} is not a multiple of {l}")));
    }
    Ok((0..period as i64).map(|i| env.law_at(i).expect("periodic lookup").clone()).collect())
}

/// Conditional relative entropy of `mu` against the environment, with
/// `0 log 0 = 0` and `+inf` when `mu` charges a jump of probability zero.
pub fn entropy(mu: &PairMeasure, env: &Environment) -> Result<f64, Level2Error> {
    if mu.bound() != env.bound() {
        return Err(Level2Error::Shape(format!("bound {} vs {}", mu.bound(), env.bound())));
    }
    let laws = period_laws(env, mu.period())?;
    let m1 = mu.marginals().m1;
    let mut total = 0.0;
    for (i, z, w) in mu.iter() {
        if w == 0.0 {
            continue;
        }
        let p = laws[i].prob(z);
        if p == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += w * (w / (m1[i] * p)).ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Target for the Euclidean projected-gradient norm (sup norm).
    pub grad_tol: f64,
    pub constraint_tol: f64,
    /// Lower guard on weights during the iteration.
    pub floor: f64,
    /// Site classes of the pair measure (defaults to the environment period).
    pub period: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iter: 200_000, grad_tol: 1e-7, constraint_tol: 1e-9, floor: 1e-12, period: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizeReport {
    pub xi: f64,
    pub minimizer: PairMeasure,
    pub value: f64,
    pub projected_gradient: f64,
    pub iterations: usize,
    pub mass_residual: f64,
    pub stationarity_residual: f64,
    pub drift_residual: f64,
    pub converged: bool,
}

struct Problem {
    vars: Vec<(usize, i64)>,
    logp: Vec<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    period: usize,
}

impl Problem {
    fn new(laws: &[JumpLaw], bound: usize, xi: f64) -> Self {
        let period = laws.len();
        let vars: Vec<(usize, i64)> = (0..period)
            .flat_map(|i| offsets(bound).map(move |z| (i, z)))
            .filter(|&(i, z)| laws[i].prob(z) > 0.0)
            .collect();
        let logp = vars.iter().map(|&(i, z)| laws[i].prob(z).ln()).collect();
        // rows: mass, stationarity for classes 0..L-2, drift
        let rows = period + 1;
        let mut a = DMatrix::zeros(rows, vars.len());
        for (k, &(i, z)) in vars.iter().enumerate() {
            a[(0, k)] = 1.0;
            let j = (i as i64 + z).rem_euclid(period as i64) as usize;
            if i + 1 < period {
                a[(1 + i, k)] += 1.0;
            }
            if j + 1 < period {
                a[(1 + j, k)] -= 1.0;
            }
            a[(rows - 1, k)] = z as f64;
        }
        let mut b = DVector::zeros(rows);
        b[0] = 1.0;
        b[rows - 1] = xi;
        Self { vars, logp, a, b, period }
    }

    fn m1(&self, w: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.period];
        for (k, &(i, _)) in self.vars.iter().enumerate() {
            m[i] += w[k];
        }
        m
    }

    fn value(&self, w: &[f64]) -> f64 {
        let m1 = self.m1(w);
        self.vars
            .iter()
            .enumerate()
            .filter(|(k, _)| w[*k] > 0.0)
            .map(|(k, &(i, _))| w[k] * (w[k].ln() - m1[i].ln() - self.logp[k]))
            .sum()
    }

    fn gradient(&self, w: &[f64]) -> DVector<f64> {
        let m1 = self.m1(w);
        DVector::from_iterator(
            w.len(),
            self.vars.iter().enumerate().map(|(k, &(i, _))| w[k].ln() - m1[i].ln() - self.logp[k]),
        )
    }

    /// Multipliers minimizing `|g - A^T nu|` in the metric `diag(s)`.
    fn multipliers(&self, g: &DVector<f64>, s: &[f64]) -> Option<DVector<f64>> {
        let mut aw = self.a.clone();
        for (k, sk) in s.iter().enumerate() {
            aw.column_mut(k).scale_mut(*sk);
        }
        let lhs = &aw * self.a.transpose();
        let rhs = &aw * g;
        lhs.cholesky().map(|c| c.solve(&rhs)).or_else(|| {
            let lhs = &aw * self.a.transpose();
            lhs.lu().solve(&rhs)
        })
    }

    fn residual(&self, w: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(w) - &self.b
    }

    /// Euclidean projection onto the affine constraint set.
    fn reproject(&self, w: &mut [f64]) {
        let res = self.residual(w);
        let lhs = &self.a * self.a.transpose();
        if let Some(nu) = lhs.cholesky().map(|c| c.solve(&res)) {
            let corr = self.a.transpose() * nu;
            for (wk, ck) in w.iter_mut().zip(corr.iter()) {
                *wk -= ck;
            }
        }
    }
}

/// Exponential tilt of the uniform law on `support` with mean `xi`.
fn tilted_uniform(support: &[i64], xi: f64) -> Option<Vec<f64>> {
    let lo = *support.iter().min()? as f64;
    let hi = *support.iter().max()? as f64;
    if !(lo < xi && xi < hi) {
        return None;
    }
    let law = |t: f64| -> Vec<f64> {
        let top = support.iter().map(|&z| t * z as f64).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = support.iter().map(|&z| (t * z as f64 - top).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let mean = |t: f64| law(t).iter().zip(support).map(|(q, z)| q * *z as f64).sum::<f64>();
    let (mut a, mut b) = (-1.0, 1.0);
    while mean(a) > xi {
        a *= 2.0;
    }
    while mean(b) < xi {
        b *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if mean(m) < xi {
            a = m;
        } else {
            b = m;
        }
    }
    Some(law(0.5 * (a + b)))
}

fn untilted_stationary(laws: &[JumpLaw]) -> Result<Vec<f64>, Level2Error> {
    let l = laws.len();
    let mut p = DMatrix::zeros(l, l);
    for (i, law) in laws.iter().enumerate() {
        for (z, q) in law.iter() {
            p[(i, (i as i64 + z).rem_euclid(l as i64) as usize)] += q;
        }
    }
    stationary_distribution(&p).ok_or_else(|| Level2Error::Singular("untilted projected chain".into()))
}

/// Strictly positive feasible start: a small admixture of the untilted
/// stationary pair measure into a site-independent tilted uniform law.
fn starting_point(prob: &Problem, laws: &[JumpLaw], bound: usize, xi: f64) -> Result<Vec<f64>, Level2Error> {
    let l = laws.len();
    let support: Vec<i64> = offsets(bound).filter(|&z| laws.iter().all(|law| law.prob(z) > 0.0)).collect();
    let pi0 = untilted_stationary(laws)?;
    let v0: f64 = laws.iter().zip(&pi0).map(|(law, p)| p * law.mean()).sum();
    for t in [1e-2, 1e-3, 1e-5] {
        let target = (xi - t * v0) / (1.0 - t);
        if let Some(q) = tilted_uniform(&support, target) {
            let w = prob
                .vars
                .iter()
                .map(|&(i, z)| {
                    let base = support.iter().position(|&s| s == z).map_or(0.0, |k| q[k] / l as f64);
                    (1.0 - t) * base + t * pi0[i] * laws[i].prob(z)
                })
                .collect();
            return Ok(w);
        }
    }
    Err(Level2Error::Infeasible { xi, reason: "no strictly feasible starting point on the common support".into() })
}

/// Minimizes the entropy over stationary pair measures with drift `xi`.
///
/// Each step moves along `-W (g - A^T nu)`, the gradient projected onto the
/// constraint null space in the metric `W = diag(w)`, with a fraction-to-the-
/// boundary cap and Armijo backtracking. The metric makes the step scale
/// with the weights, which keeps iterates positive without a barrier.
pub fn minimize_entropy(env: &Environment, xi: f64, cfg: &SolverConfig) -> Result<MinimizeReport, Level2Error> {
    let l = cfg.period.unwrap_or(env.period().ok_or(Level2Error::NotPeriodic)?);
    let laws = period_laws(env, l)?;
    let bound = env.bound();
    if !xi.is_finite() || xi.abs() >= bound as f64 {
        return Err(Level2Error::Infeasible { xi, reason: format!("|xi| must be below B = {bound}") });
    }
    let prob = Problem::new(&laws, bound, xi);
    let mut w = starting_point(&prob, &laws, bound, xi)?;
    let mut f = prob.value(&w);
    let ones = vec![1.0; w.len()];
    let mut iterations = 0;
    let mut pg_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let g = prob.gradient(&w);
        let nu_e = prob.multipliers(&g, &ones).ok_or_else(|| Level2Error::Singular("A A^T".into()))?;
        let pg = &g - prob.a.transpose() * nu_e;
        pg_norm = pg.amax();
        let cres = prob.residual(&w).amax();
        if pg_norm <= cfg.grad_tol && cres <= cfg.constraint_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let nu = prob.multipliers(&g, &w).ok_or_else(|| Level2Error::Singular("A W A^T".into()))?;
        let proj = &g - prob.a.transpose() * nu;
        let d: Vec<f64> = w.iter().zip(proj.iter()).map(|(wk, pk)| -wk * pk).collect();
        let slope: f64 = g.iter().zip(&d).map(|(gk, dk)| gk * dk).sum();
        let mut t: f64 = 1.0;
        for (wk, dk) in w.iter().zip(&d) {
            if *dk < 0.0 {
                t = t.min(0.99 * (wk - cfg.floor).max(0.0) / -dk);
            }
        }
        let mut accepted = false;
        while t > 1e-20 {
            let mut trial: Vec<f64> = w.iter().zip(&d).map(|(wk, dk)| wk + t * dk).collect();
            prob.reproject(&mut trial);
            if trial.iter().all(|v| *v >= cfg.floor) {
                let ft = prob.value(&trial);
                if ft <= f + 1e-4 * t * slope.min(0.0) {
                    w = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let res = prob.residual(&w);
    let mut weights = vec![0.0; l * 2 * bound];
    for (k, &(i, z)) in prob.vars.iter().enumerate() {
        weights[i * 2 * bound + offset_index(bound, z)] = w[k];
    }
    let minimizer = PairMeasure::new(l, bound, weights)?;
    let stationarity_residual = minimizer.marginals().stationarity_residual;
    Ok(MinimizeReport {
        xi,
        value: f,
        projected_gradient: pg_norm,
        iterations,
        mass_residual: res[0].abs(),
        stationarity_residual,
        drift_residual: res[res.len() - 1].abs(),
        converged,
        minimizer,
    })
}

/// `w(i, z) = (1/n) #{k < n : X_k = i mod L, X_{k+1} - X_k = z}`.
pub fn empirical_pair_measure(sites: &[i64], period: usize, bound: usize) -> Result<PairMeasure, Level2Error> {
    if sites.len() < 2 {
        return Err(Level2Error::EmptyPath);
    }
    let n = (sites.len() - 1) as f64;
    let mut weights = vec![0.0; period * 2 * bound];
    for (step, pair) in sites.windows(2).enumerate() {
        let z = pair[1] - pair[0];
        if z == 0 || z.unsigned_abs() as usize > bound {
            return Err(Level2Error::BadStep { step, jump: z });
        }
        let i = pair[0].rem_euclid(period as i64) as usize;
        weights[i * 2 * bound + offset_index(bound, z)] += 1.0 / n;
    }
    PairMeasure::new(period, bound, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn srw() -> Environment {
        Environment::homogeneous(JumpLaw::nearest_neighbor(0.5).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn entropy_of_the_environment_itself_vanishes() {
        let env = Environment::random_periodic(3, 2, 0.1, 4).unwrap();
        let mu = PairMeasure::from_laws(&env, &[1.0 / 3.0; 3]).unwrap();
        assert!(entropy(&mu, &env).unwrap().abs() < 1e-15);
    }

    #[test]
    fn entropy_closed_form_for_simple_walk() {
        let q: f64 = 0.8;
        let mu = PairMeasure::new(1, 1, vec![1.0 - q, q]).unwrap();
        let expected = q * (2.0 * q).ln() + (1.0 - q) * (2.0 * (1.0 - q)).ln();
        assert!((entropy(&mu, &srw()).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn unsupported_jump_gives_infinity() {
        let law = JumpLaw::new(2, &[(-1, 0.5), (1, 0.5)]).unwrap();
        let env = Environment::homogeneous(law, 0.5).unwrap();
        let mu = PairMeasure::from_fn(1, 2, |_, z| if z == 2 || z == -1 { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(entropy(&mu, &env).unwrap(), f64::INFINITY);
    }

    #[test]
    fn point_mass_marginals() {
        let mu = PairMeasure::from_fn(2, 1, |i, z| if i == 0 && z == 1 { 1.0 } else { 0.0 }).unwrap();
        let m = mu.marginals();
        assert_eq!(m.m1, vec![1.0, 0.0]);
        assert_eq!(m.m2, vec![0.0, 1.0]);
        assert_eq!(m.stationarity_residual, 1.0);
    }

    #[test]
    fn untilted_stationary_pair_measure_is_stationary() {
        let env = Environment::random_periodic(4, 2, 0.1, 9).unwrap();
        let laws: Vec<JumpLaw> = (0..4).map(|i| env.law_at(i).unwrap().clone()).collect();
        let pi = untilted_stationary(&laws).unwrap();
        let mu = PairMeasure::from_laws(&env, &pi).unwrap();
        assert!(mu.marginals().stationarity_residual < 1e-12);
    }

    #[test]
    fn cramer_value_for_simple_walk() {
        let rep = minimize_entropy(&srw(), 0.5, &SolverConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!((rep.value - 0.130812035941136959).abs() < 1e-10);
        assert!(rep.drift_residual < 1e-9);
    }

    #[test]
    fn zero_at_untilted_drift() {
        let env = Environment::random_periodic(3, 1, 0.2, 2).unwrap();
        let laws: Vec<JumpLaw> = (0..3).map(|i| env.law_at(i).unwrap().clone()).collect();
        let pi = untilted_stationary(&laws).unwrap();
        let v0: f64 = laws.iter().zip(&pi).map(|(l, p)| p * l.mean()).sum();
        let rep = minimize_entropy(&env, v0, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.value.abs() < 1e-12);
        let mu0 = PairMeasure::from_laws(&env, &pi).unwrap();
        assert!(rep.minimizer.total_variation(&mu0) < 1e-6);
    }

    #[test]
    fn infeasible_drift() {
        assert!(matches!(minimize_entropy(&srw(), 1.0, &SolverConfig::default()), Err(Level2Error::Infeasible { .. })));
    }

    #[test]
    fn empirical_measure_of_single_step() {
        let mu = empirical_pair_measure(&[0, 1], 2, 1).unwrap();
        assert_eq!(mu.weight(0, 1), 1.0);
        assert!(empirical_pair_measure(&[0], 2, 1).is_err());
        assert!(empirical_pair_measure(&[0, 3], 2, 1).is_err());
    }
}
