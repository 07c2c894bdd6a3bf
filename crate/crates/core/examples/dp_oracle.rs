// Exact law of `N_n` by dynamic programming, checked against brute-force
// enumeration of all `2^n` decision sequences.

use odl::oracle::{enumerate_distribution, exact_distribution};
use odl::{moments, ModelParams};

pub fn run_example() -> odl::Result<()> {
    let p = ModelParams::new(0.3, 0.25, 0.9, 0.1, 2, 1)?;
    let dp = exact_distribution(&p, 10)?;
    let brute = enumerate_distribution(&p, 10)?;
    let gap = dp
        .probabilities
        .iter()
        .zip(&brute.probabilities)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("n=10: max |dp - enumeration| = {gap:.2e}");

    let big = exact_distribution(&p, 2000)?;
    println!(
        "n=2000: mean {:.6} (closed form {:.6}), variance {:.6} (closed form {:.6})",
        big.mean(),
        moments::mean_n(&p, 2000),
        big.variance(),
        moments::variance_n(&p, 2000)
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
