// Full verification of one parameter set, the same pipeline `odl verify` runs.

use odl::harness::{run_verification, verification_request, Tolerances, PATH_RATIO};
use odl::ModelParams;

pub fn run_example() -> odl::Result<()> {
    let p = ModelParams::with_theta(0.3, 0.2, 1, 1)?;
    let req = verification_request(&p, 20_000, 2_000, 42, 1_000, PATH_RATIO)?;
    let v = run_verification(&req, &Tolerances::default())?;
    for row in &v.report.rows {
        println!(
            "{:<5} {:<18} theory {:>10.5}  empirical {:>10.5}",
            if !row.enforced { "info" } else if row.passed { "pass" } else { "fail" },
            row.name,
            row.theoretical,
            row.empirical
        );
    }
    println!("all passed: {}", v.report.all_passed);
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
