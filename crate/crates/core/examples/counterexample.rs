// With jumps of size two the gap lambda_bar - lambda depends on r; for
// nearest-neighbor walks it is constant.

use std::error::Error;

use rwre_ldp::passage::ULimitOptions;
use rwre_ldp::rate::{asymmetry_demo, ASYMMETRY_R_VALUES};
use rwre_ldp::JumpLaw;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let law = JumpLaw::new(2, &[(-2, 1.0 / 7.0), (-1, 3.0 / 7.0), (1, 1.0 / 7.0), (2, 2.0 / 7.0)])?;
    let rep = asymmetry_demo(&law, &ASYMMETRY_R_VALUES, &ULimitOptions::default())?;
    println!("{:>6} {:>20} {:>20}", "r", "gap (roots)", "gap (pipeline)");
    for row in &rep.rows {
        println!("{:>6} {:>20.15} {:>20.15}", row.r, row.gap_poly(), row.gap_pipeline());
    }
    println!("variation {:.6}", rep.variation_pipeline);

    let control =
        asymmetry_demo(&JumpLaw::nearest_neighbor(3.0 / 7.0)?, &ASYMMETRY_R_VALUES, &ULimitOptions::default())?;
    println!("nearest-neighbor control variation {:.1e}", control.variation_pipeline);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
