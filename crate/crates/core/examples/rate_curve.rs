// Quenched rate function on a speed grid, with the Cramér check for a
// homogeneous law.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::rate::{cramer_oracle, rate, rate_curve, RateOptions};
use rwre_ldp::JumpLaw;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::periodic(vec![JumpLaw::nearest_neighbor(0.8)?, JumpLaw::nearest_neighbor(0.4)?], 0.2)?;
    let opts = RateOptions::for_env(&env)?;
    println!("xi_c in [{:.3e}, {:.3e}]", opts.xi_c.lower, opts.xi_c.upper);
    let grid: Vec<f64> = (0..11).map(|k| -1.0 + 0.2 * k as f64).collect();
    let curve = rate_curve(&env, &grid, &opts)?;
    println!("{:>6} {:>14} {:>12} {:>9}", "xi", "I(xi)", "r*", "branch");
    for s in &curve.samples {
        println!("{:>6.2} {:>14.10} {:>12.6} {:>9}", s.xi, s.value, s.r_star, s.branch.as_str());
    }
    println!("convexity defect {:.1e}", curve.convexity_defect());

    let law = JumpLaw::new(2, &[(-2, 0.1), (-1, 0.4), (1, 0.3), (2, 0.2)])?;
    let homo = Environment::homogeneous(law.clone(), 0.3)?;
    let h_opts = RateOptions::for_env(&homo)?;
    for xi in [-1.0, 0.5, 1.5] {
        let v = rate(&homo, xi, &h_opts)?;
        println!("homogeneous I({xi}) = {:.10}, Cramér {:.10}", v.value, cramer_oracle(&law, xi));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
