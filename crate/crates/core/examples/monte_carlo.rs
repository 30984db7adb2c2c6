// Seeded simulation under the original and tilted kernels.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::mc::{empirical_velocity_check, passage_lln_check, simulate, Sampler};
use rwre_ldp::JumpLaw;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::periodic(vec![JumpLaw::nearest_neighbor(0.8)?, JumpLaw::nearest_neighbor(0.4)?], 0.2)?;
    let path = simulate(&Sampler::original(&env), 0, 20, 42, 0);
    println!("first sites: {:?}", path.sites);

    for rep in [passage_lln_check(&env, -0.5, 1000, 100, 42)?, empirical_velocity_check(&env, -0.5, 2000, 100, 43)?] {
        println!(
            "{}: estimate {:.5} +- {:.5}, target {:.5}, z = {:.2}, pass = {}",
            rep.name, rep.estimate, rep.std_err, rep.target, rep.z_score, rep.pass
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
