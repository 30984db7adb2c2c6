// The tilted kernel, its invariant density and the corrector.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::passage::{u_limit_periodic, ULimitOptions};
use rwre_ldp::tilt::{corrector, invariant_density, tilt_kernel, tilt_report, DensityMode};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let env = Environment::random_periodic(3, 2, 0.1, 5)?;
    let r = -0.7;
    let opts = ULimitOptions::default();
    let u = u_limit_periodic(&env, r, &opts)?;
    let k = tilt_kernel(&env, &u)?;
    for x in 0..3 {
        println!("k({x}, .) = {:?}", k.row(x).unwrap());
    }
    println!(
        "row-sum defect {:.1e}, min k(x, +-1) {:.4} >= floor {:.4}",
        k.row_sum_defect, k.min_nearest, k.ellipticity_floor
    );

    let d = invariant_density(&k, DensityMode::PeriodicExact)?;
    println!("density {:?}, drift {:.8}", d.phi, d.drift);

    let rep = tilt_report(&env, r, &opts)?;
    let f = corrector(&env, &u, rep.lambda)?;
    println!(
        "corrector: max |F| {:.4} (bound {:.4}), cocycle defect {:.1e}, period loop {:.1e}",
        f.max_abs,
        f.moment_bound,
        f.cocycle,
        f.loop_sum.unwrap_or(0.0)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
