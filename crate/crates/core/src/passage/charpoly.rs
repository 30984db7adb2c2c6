use serde::Serialize;

use super::PassageError;
use crate::environment::JumpLaw;

/// Positive roots of `sum_z p(z) e^r x^{z+B} - x^B` for a homogeneous law.
#[derive(Debug, Clone, Serialize)]
pub struct CharPolyResult {
    pub r: f64,
    /// Ascending coefficients: `coefficients[k]` multiplies `x^k`.
    pub coefficients: Vec<f64>,
    pub positive_roots: Vec<f64>,
    /// Larger positive root, `exp(-lambda(r))`.
    pub x_right: f64,
    /// Smaller positive root, `exp(lambda_bar(r))`.
    pub x_left: f64,
    /// `|poly(root)|` relative to `sum_k |c_k| root^k`, per reported root.
    pub relative_residuals: Vec<f64>,
}

impl CharPolyResult {
    pub fn lambda(&self) -> f64 {
        -self.x_right.ln()
    }

    pub fn lambda_bar(&self) -> f64 {
        self.x_left.ln()
    }
}

/// `log sum_z p(z) e^{theta z}`, evaluated stably.
pub fn log_mgf(law: &JumpLaw, theta: f64) -> f64 {
    let terms: Vec<f64> = law.iter().filter(|(_, p)| *p > 0.0).map(|(z, p)| p.ln() + theta * z as f64).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Derivative of [`log_mgf`]: the mean of the exponentially tilted law.
pub fn log_mgf_slope(law: &JumpLaw, theta: f64) -> f64 {
    let top =
        law.iter().filter(|(_, p)| *p > 0.0).map(|(z, p)| p.ln() + theta * z as f64).fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (z, p) in law.iter().filter(|(_, p)| *p > 0.0) {
        let w = (p.ln() + theta * z as f64 - top).exp();
        num += z as f64 * w;
        den += w;
    }
    num / den
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(lo) < 0 < f(hi) or the reverse; only the sign pattern is used
    let flo = f(lo) < 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn poly_eval(c: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut scale = 0.0;
    for ck in c.iter().rev() {
        v = v * x + ck;
        scale = scale * x + ck.abs();
    }
    (v, scale)
}

fn newton_polish(c: &[f64], mut x: f64) -> f64 {
    for _ in 0..3 {
        let (v, _) = poly_eval(c, x);
        let dv: f64 = c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck * x.powi(k as i32 - 1)).sum();
        if dv == 0.0 {
            break;
        }
        let next = x - v / dv;
        if !(next > 0.0) || (next - x).abs() > 1e-8 * x {
            break;
        }
        x = next;
    }
    x
}

/// Finds the positive roots of the characteristic polynomial.
///
/// Substituting `x = e^theta`, roots solve `log_mgf(theta) = -r`. Since
/// `log_mgf` is strictly convex there are at most two, one on each side of
/// its minimizer, and each is isolated by bisection in `theta` before a
/// Newton polish in `x`.
pub fn char_poly_roots(law: &JumpLaw, r: f64) -> Result<CharPolyResult, PassageError> {
    let b = law.bound() as i64;
    if !r.is_finite() {
        return Err(PassageError::BadArgument("r must be finite".into()));
    }
    let has = |right: bool| law.iter().any(|(z, p)| (z > 0) == right && p > 0.0);
    if !has(true) || !has(false) {
        return Err(PassageError::BadArgument("law needs jumps in both directions".into()));
    }
    let mut coefficients = vec![0.0; 2 * b as usize + 1];
    for (z, p) in law.iter() {
        coefficients[(z + b) as usize] += p * r.exp();
    }
    coefficients[b as usize] -= 1.0;

    let slope = |t: f64| log_mgf_slope(law, t);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while slope(lo) > 0.0 && lo > -1e6 {
        lo *= 2.0;
    }
    while slope(hi) < 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let theta_min = bisect(lo, hi, slope);
    let g = |t: f64| log_mgf(law, t) + r;
    if g(theta_min) > 0.0 {
        return Err(PassageError::NoRoot { r });
    }
    let mut step = 1.0;
    while g(theta_min + step) < 0.0 && step < 1e6 {
        step *= 2.0;
    }
    let theta_right = bisect(theta_min, theta_min + step, g);
    let mut step = 1.0;
    while g(theta_min - step) < 0.0 && step < 1e6 {
        step *= 2.0;
    }
    let theta_left = bisect(theta_min - step, theta_min, g);

    let x_right = newton_polish(&coefficients, theta_right.exp());
    let x_left = newton_polish(&coefficients, theta_left.exp());
    let positive_roots = if x_right == x_left { vec![x_left] } else { vec![x_left, x_right] };
    let relative_residuals = positive_roots
        .iter()
        .map(|&x| {
            let (v, s) = poly_eval(&coefficients, x);
            v.abs() / s
        })
        .collect();
    Ok(CharPolyResult { r, coefficients, positive_roots, x_right, x_left, relative_residuals })
}
