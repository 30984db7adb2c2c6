//! Quenched large deviations for one-dimensional random walks in random
//! environments with bounded jumps.
//!
//! The crate computes passage-time exponents `lambda(r)`, `lambda_bar(r)`
//! and the critical tilt `r_c`, builds the tilted kernels and invariant
//! densities behind them, evaluates the level-1 rate function `I(xi)` by
//! Legendre duality, and checks everything against independent routes:
//! characteristic polynomials, Cramér transforms, direct entropy
//! minimization, path enumeration and Monte Carlo.
//!
//! ```
//! use rwre_ldp::environment::{Environment, JumpLaw};
//! use rwre_ldp::rate::{rate, RateOptions};
//!
//! let env = Environment::homogeneous(JumpLaw::nearest_neighbor(0.5).unwrap(), 0.5).unwrap();
//! let opts = RateOptions::for_env(&env).unwrap();
//! let i = rate(&env, 0.5, &opts).unwrap();
//! assert!((i.value - 0.1308120359).abs() < 1e-8);
//! ```

pub mod cli;
pub mod environment;
pub mod level2;
pub(crate) mod linalg;
pub mod mc;
pub mod passage;
pub mod rate;
pub mod rng;
pub mod tilt;

pub use environment::{Environment, JumpLaw};
