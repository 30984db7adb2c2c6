use serde::Serialize;

use super::PassageError;
use crate::environment::Environment;

/// Value cap beyond which an iteration is declared divergent.
pub const VALUE_CAP: f64 = 1e30;
/// Consecutive growing updates that count as divergence.
const GROWTH_WINDOW: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    SupercriticalOrDiverged,
    SlowConvergence,
}

/// Truncated passage MGF `h(x)` on `[-M, n + B)`.
#[derive(Debug, Clone, Serialize)]
pub struct MgfSolve {
    pub r: f64,
    pub n: i64,
    pub m_trunc: i64,
    /// `h(x)` for `x = -M, ..., n + B - 1`.
    pub h: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    pub sup_update: f64,
}

impl MgfSolve {
    /// `h(x)`; zero below `-M`, one on the overshoot block.
    pub fn at(&self, x: i64) -> f64 {
        if x < -self.m_trunc {
            0.0
        } else {
            self.h[(x + self.m_trunc) as usize]
        }
    }
}

/// Site weights `p_x(z) e^r` in storage order for `x` in `[lo, hi]`.
pub(crate) fn weights(env: &Environment, r: f64, lo: i64, hi: i64) -> Result<Vec<f64>, PassageError> {
    let er = r.exp();
    let mut w = Vec::with_capacity(((hi - lo + 1).max(0) as usize) * 2 * env.bound());
    for x in lo..=hi {
        w.extend(env.law_at(x)?.probs().iter().map(|p| p * er));
    }
    Ok(w)
}

/// Monotone Gauss-Seidel value iteration for
/// `h(x) = sum_z p_x(z) e^r h(x + z)` on `[-M, n)`, with `h = 1` on
/// `[n, n + B)` and `h = 0` below `-M`, starting from the indicator of the
/// overshoot block.
pub fn hit_mgf(env: &Environment, r: f64, n: i64, m: i64, tol: f64, max_iter: usize) -> Result<MgfSolve, PassageError> {
    let b = env.bound() as i64;
    if n < 1 || m < b {
        return Err(PassageError::BadArgument(format!("need n >= 1 and M >= B, got n = {n}, M = {m}")));
    }
    if !r.is_finite() || !(tol > 0.0) {
        return Err(PassageError::BadArgument("r must be finite and tol positive".into()));
    }
    let w = weights(env, r, -m, n - 1)?;
    let len = (n + b + m) as usize;
    let mut h = vec![0.0; len];
    for v in &mut h[(n + m) as usize..] {
        *v = 1.0;
    }
    let two_b = 2 * b as usize;
    let mut status = SolveStatus::SlowConvergence;
    let mut sup_update = f64::INFINITY;
    let mut iterations = 0;
    let mut growing = 0;
    let mut last_update = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let mut upd: f64 = 0.0;
        let mut top: f64 = 1.0;
        // right to left so that mass from the target block travels in one sweep
        for i in (0..(n + m) as usize).rev() {
            let row = &w[i * two_b..(i + 1) * two_b];
            let mut s = 0.0;
            for (k, wk) in row.iter().enumerate() {
                let z = if k < b as usize { k as i64 - b } else { k as i64 - b + 1 };
                let j = i as i64 + z;
                if j >= 0 {
                    s += wk * h[j as usize];
                }
            }
            upd = upd.max(s - h[i]);
            top = top.max(s);
            h[i] = s;
        }
        sup_update = upd;
        if !top.is_finite() || top > VALUE_CAP {
            status = SolveStatus::SupercriticalOrDiverged;
            break;
        }
        if upd <= tol * top {
            status = SolveStatus::Converged;
            break;
        }
        growing = if upd > last_update { growing + 1 } else { 0 };
        last_update = upd;
        if growing >= GROWTH_WINDOW {
            status = SolveStatus::SupercriticalOrDiverged;
            break;
        }
    }
    Ok(MgfSolve { r, n, m_trunc: m, h, iterations, converged: status == SolveStatus::Converged, status, sup_update })
}

/// Exact first-passage sum over paths of length at most `max_len`, plus a
/// bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BruteMgf {
    pub value: f64,
    pub tail_bound: f64,
}

/// Sums `e^{r len} P(path)` over all paths from 0 that first reach `[n, inf)`
/// at step `len <= max_len`. Every discarded path has weight at most
/// `e^{r len}` with `len > max_len`, so the tail is below
/// `e^{r max_len} / (1 - e^r)`.
pub fn brute_mgf(env: &Environment, r: f64, n: i64, max_len: usize) -> Result<BruteMgf, PassageError> {
    if !(r < 0.0) {
        return Err(PassageError::BadArgument(format!("brute_mgf needs r < 0, got {r}")));
    }
    if n < 1 {
        return Err(PassageError::BadArgument(format!("need n >= 1, got {n}")));
    }
    let b = env.bound() as i64;
    let lo = -(max_len as i64) * b;
    let laws = (lo..n).map(|x| env.law_at(x).cloned()).collect::<Result<Vec<_>, _>>()?;
    let width = (n - lo) as usize;
    let mut dist = vec![0.0; width];
    dist[(-lo) as usize] = 1.0;
    let mut next = vec![0.0; width];
    let mut value = 0.0;
    for len in 1..=max_len {
        let disc = (r * len as f64).exp();
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (z, p) in laws[i].iter() {
                let j = i as i64 + z;
                if j >= width as i64 {
                    value += disc * mass * p;
                } else {
                    next[j as usize] += mass * p;
                }
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    let tail_bound = (r * max_len as f64).exp() / (1.0 - r.exp());
    Ok(BruteMgf { value, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::JumpLaw;

    fn srw() -> Environment {
        Environment::homogeneous(JumpLaw::nearest_neighbor(0.5).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn gamblers_ruin_at_zero_tilt() {
        // P_0(hit 1 before -M-1) = (M+1)/(M+2)
        for m in [5, 20] {
            let s = hit_mgf(&srw(), 0.0, 1, m, 1e-14, 1_000_000).unwrap();
            assert!(s.converged);
            let exact = (m + 1) as f64 / (m + 2) as f64;
            assert!((s.at(0) - exact).abs() < 1e-10, "{} vs {exact}", s.at(0));
        }
    }

    #[test]
    fn symmetric_tilted_value() {
        let s = hit_mgf(&srw(), -0.1, 1, 200, 1e-15, 100_000).unwrap();
        assert!((s.at(0) - 0.634636372946206747).abs() < 1e-10);
    }

    #[test]
    fn monotone_in_truncation_depth() {
        let env = Environment::random_periodic(3, 2, 0.1, 1).unwrap();
        let mut prev = 0.0;
        for m in [2, 4, 8, 16, 32] {
            let s = hit_mgf(&env, -0.3, 2, m, 1e-15, 100_000).unwrap();
            assert!(s.at(0) >= prev - 1e-15);
            prev = s.at(0);
        }
    }

    #[test]
    fn supercritical_is_flagged() {
        let s = hit_mgf(&srw(), 0.3, 1, 200, 1e-14, 1_000_000).unwrap();
        assert_eq!(s.status, SolveStatus::SupercriticalOrDiverged);
        assert!(!s.converged);
    }

    #[test]
    fn brute_force_single_path() {
        let eps = 1e-6;
        let env = Environment::homogeneous(JumpLaw::nearest_neighbor(1.0 - eps).unwrap(), eps).unwrap();
        let b = brute_mgf(&env, -1.0, 1, 20).unwrap();
        assert!((b.value - (1.0 - eps) * (-1.0f64).exp()).abs() < 1e-6);
        assert!(brute_mgf(&env, 0.0, 1, 5).is_err());
    }

    #[test]
    fn brute_force_matches_value_iteration() {
        let b = brute_mgf(&srw(), -0.1, 1, 25).unwrap();
        let s = hit_mgf(&srw(), -0.1, 1, 60, 1e-15, 100_000).unwrap();
        assert!((b.value - s.at(0)).abs() <= b.tail_bound + 1e-12);
    }
}
