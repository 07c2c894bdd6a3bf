// Limit constants for a parameter set in each regime, as JSON.

use odl::theory::theory_summary;
use odl::ModelParams;

pub fn run_example() -> odl::Result<()> {
    for p in [
        ModelParams::with_theta(0.3, 0.2, 1, 1)?,
        ModelParams::new(0.1, 0.8, 0.625, 0.0, 1, 1)?,
        ModelParams::with_theta(0.2, 0.6, 2, 1)?,
    ] {
        let s = theory_summary(&p)?;
        println!("{}", serde_json::to_string_pretty(&s)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
