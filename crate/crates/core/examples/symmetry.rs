// Nearest-neighbor symmetry: I(xi) - I(-xi) = xi E[log rho].

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::rate::{symmetry_gap, RateOptions};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::random_periodic(4, 1, 0.1, 21)?;
    let opts = RateOptions::for_env(&env)?;
    let rep = symmetry_gap(&env, &[-0.2, -1.0, -3.0], &[0.2, 0.5, 0.8], &opts)?;
    println!("E[log rho] = {:.12}", rep.e_log_rho);
    for (r, g) in &rep.lambda_gaps {
        println!("r = {r:>5}: lambda_bar - lambda = {g:.12}");
    }
    for (xi, res) in &rep.identity_residuals {
        println!("xi = {xi}: residual {res:.1e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
