// Minimizing relative entropy over stationary pair measures with a fixed
// drift, compared with the tilted measure.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::level2::{minimize_entropy, SolverConfig};
use rwre_ldp::passage::ULimitOptions;
use rwre_ldp::tilt::ansatz_measure;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::random_periodic(2, 2, 0.1, 4)?;
    for r in [-0.4, -1.0] {
        let ansatz = ansatz_measure(&env, r, &ULimitOptions::default())?;
        let rep = minimize_entropy(&env, ansatz.xi, &SolverConfig::default())?;
        println!(
            "r = {r}: xi = {:.6}, minimum {:.10} after {} iterations, tilted measure {:.10}, TV {:.1e}",
            ansatz.xi,
            rep.value,
            rep.iterations,
            ansatz.entropy(&env)?,
            rep.minimizer.total_variation(&ansatz.measure)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
