//! Passage-time generating functions and the exponents built from them.
//!
//! For a tilt parameter `r` the quantity of interest is
//! `h_n(x) = E_x[exp(r tau_n); tau_n < inf]`, where `tau_n` is the first time
//! the walk reaches `[n, inf)`. Ratios `h_n(x + z) / h_n(x)` converge as
//! `n -> inf` to a positive cocycle `u_r(x, z)`, and
//! `lambda(r) = -mean log u_r(., 1)` is the exponential growth rate of
//! `E[exp(r tau_n)]`. The left-passage exponent `lambda_bar` is `lambda` of
//! the reflected environment.

mod charpoly;
mod lambda;
mod mgf;
mod sweep;

use thiserror::Error;

use crate::environment::EnvError;

pub use charpoly::{char_poly_roots, log_mgf, log_mgf_slope, CharPolyResult};
pub use lambda::{
    estimate_rc, lambda, lambda_bar, lambda_curve, lambda_prime, LambdaCurve, LambdaPoint, LambdaPrime, LambdaValue,
    RcEstimate, RcOptions,
};
pub use mgf::{brute_mgf, hit_mgf, BruteMgf, MgfSolve, SolveStatus};
pub use sweep::{u_limit, u_limit_periodic, zeta_nn, ULimit, ULimitOptions, ZetaNn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PassageError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid argument: {0}")]
    BadArgument(String),
    #[error("supercritical or diverged at r = {r}: {detail}")]
    Supercritical { r: f64, detail: String },
    #[error("no convergence at r = {r}: last change {gap:e} at extension {n_used}")]
    SlowConvergence { r: f64, gap: f64, n_used: i64 },
    #[error("operation needs nearest-neighbor jumps, environment has B = {0}")]
    NotNearestNeighbor(usize),
    #[error("no positive characteristic root at r = {r}")]
    NoRoot { r: f64 },
    #[error("derivative estimates disagree: finite difference {fd}, stationary chain {chain}")]
    MethodsDisagree { fd: f64, chain: f64 },
    #[error("tilted chain: {0}")]
    Tilt(String),
}

impl PassageError {
    /// True for failures that signal `r` at or beyond the critical value.
    pub fn is_supercritical(&self) -> bool {
        matches!(self, Self::Supercritical { .. } | Self::SlowConvergence { .. } | Self::NoRoot { .. })
    }
}

/// The contraction rate `(1 - (delta e^r)^{2B})^{1/B}` of the Cauchy
/// estimate for `u_{r,n}`; recorded alongside each limit as a certificate.
pub fn contraction_rate(delta: f64, r: f64, bound: usize) -> f64 {
    let q = (delta * r.exp()).powi(2 * bound as i32);
    (1.0 - q).max(0.0).powf(1.0 / bound as f64)
}
