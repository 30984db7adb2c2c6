macro_rules! example {
    ($module:ident, $file:literal) => {
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(environments, "environments.rs");
example!(lambda_curve, "lambda_curve.rs");
example!(tilted_kernel, "tilted_kernel.rs");
example!(rate_curve, "rate_curve.rs");
example!(level2_minimization, "level2_minimization.rs");
example!(counterexample, "counterexample.rs");
example!(symmetry, "symmetry.rs");
example!(monte_carlo, "monte_carlo.rs");
example!(run_config, "run_config.rs");

#[test]
fn environments_example_runs() {
    environments::run_example().unwrap();
}

#[test]
fn lambda_curve_example_runs() {
    lambda_curve::run_example().unwrap();
}

#[test]
fn tilted_kernel_example_runs() {
    tilted_kernel::run_example().unwrap();
}

#[test]
fn rate_curve_example_runs() {
    rate_curve::run_example().unwrap();
}

#[test]
fn level2_example_runs() {
    level2_minimization::run_example().unwrap();
}

#[test]
fn counterexample_example_runs() {
    counterexample::run_example().unwrap();
}

#[test]
fn symmetry_example_runs() {
    symmetry::run_example().unwrap();
}

#[test]
fn monte_carlo_example_runs() {
    monte_carlo::run_example().unwrap();
}

#[test]
fn run_config_example_runs() {
    run_config::run_example().unwrap();
}
