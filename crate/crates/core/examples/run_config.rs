// Driving the library from a JSON config, as the binary does.

use std::error::Error;

use rwre_ldp::cli::{run_bytes, RunOptions};

const CONFIG: &str = r#"{
  "task": "lambda-curve",
  "environment": {"type": "homogeneous", "B": 1, "delta": 0.25, "laws": [{"-1": 0.25, "1": 0.75}]},
  "grid": {"min": -2.0, "max": -0.5, "points": 4}
}"#;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let out = std::env::temp_dir().join(format!("rwre-ldp-example-{}", std::process::id()));
    let opts = RunOptions { out: Some(out.clone()), ..RunOptions::default() };
    let outcome = run_bytes(CONFIG.as_bytes(), &opts);
    println!("exit code {}", outcome.exit_code);
    for f in &outcome.files {
        println!("--- {}", f.display());
        print!("{}", std::fs::read_to_string(f)?);
    }
    std::fs::remove_dir_all(&out)?;
    if outcome.exit_code != 0 {
        return Err(format!("run failed with exit code {}", outcome.exit_code).into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
