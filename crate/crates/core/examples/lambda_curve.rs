// Passage-time exponents lambda(r), lambda_bar(r) and the critical tilt.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::passage::{estimate_rc, lambda, lambda_curve, lambda_prime, RcOptions, ULimitOptions};
use rwre_ldp::JumpLaw;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::periodic(vec![JumpLaw::nearest_neighbor(0.8)?, JumpLaw::nearest_neighbor(0.4)?], 0.2)?;
    let u = ULimitOptions::default();

    let rc = estimate_rc(&env, &RcOptions::default());
    println!("critical tilt in [{:.10}, {:.10}] (consistent: {})", rc.lo, rc.hi, rc.consistent);

    let grid: Vec<f64> = (0..8).map(|k| -2.0 + 0.25 * k as f64).collect();
    let curve = lambda_curve(&env, &grid, &u, &RcOptions::default())?;
    println!("{:>6} {:>14} {:>14}", "r", "lambda", "lambda_bar");
    for p in &curve.points {
        println!("{:>6.2} {:>14.10} {:>14.10}", p.r, p.lambda.value, p.lambda_bar.value);
    }

    let lp = lambda_prime(&env, -0.5, 1e-4, 1e-5, &u)?;
    println!("lambda'(-0.5): finite difference {:.8}, tilted chain {:.8}", lp.finite_difference, lp.value);

    // above the critical tilt the limit blows up
    let above = lambda(&env, rc.hi + 0.05, &u)?;
    println!("lambda(rc + 0.05) supercritical: {}", above.supercritical);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
