// Building, validating and reflecting environments.

use std::error::Error;

use rwre_ldp::environment::Environment;
use rwre_ldp::JumpLaw;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let law = JumpLaw::new(2, &[(-2, 0.1), (-1, 0.3), (1, 0.4), (2, 0.2)])?;
    let periodic = Environment::periodic(vec![law.clone(), law.reflected()], 0.2)?;
    let diag = periodic.validate();
    println!(
        "periodic: valid={} min p(+1)={} min p(-1)={}",
        diag.is_valid(),
        diag.min_plus_one_prob,
        diag.min_minus_one_prob
    );
    println!("law at 3 after reflection: {:?}", periodic.reflect().law_at(3)?.probs());

    // two-atom iid environment on a finite window
    let atoms = [(0.5, JumpLaw::nearest_neighbor(0.35)?), (0.5, JumpLaw::nearest_neighbor(0.8)?)];
    let window = Environment::sample_iid(&atoms, -50, 50, 7, 0.2)?;
    let mean = window.site_average(|l| l.mean());
    println!("iid window {:?}: average local drift {mean:.4}", window.window());

    let json = r#"{"type": "periodic", "B": 1, "delta": 0.2, "laws": [{"-1": 0.2, "1": 0.8}, {"-1": 0.6, "1": 0.4}]}"#;
    let from_json = Environment::from_json(json)?;
    println!("from json: period {:?}, bound {}", from_json.period(), from_json.bound());

    let bad = Environment::homogeneous(JumpLaw::nearest_neighbor(0.95)?, 0.1)?;
    println!("p(-1) = 0.05 with delta = 0.1: {:?}", bad.ensure_valid().unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
