// Ensemble of paths: the scaled fluctuation variance, the two-time kernel
// and thread-count independence of the result.

use odl::ensemble::{run_ensemble, EnsembleRequest};
use odl::{theory, ModelParams};

pub fn run_example() -> odl::Result<()> {
    let p = ModelParams::with_theta(0.3, 0.2, 1, 1)?;
    let mut req = EnsembleRequest::new(p, 10_000, 2_000, 42);
    req.checkpoints = vec![5_000, 10_000];
    let s = run_ensemble(&req)?;
    let last = &s.checkpoints[1];
    println!(
        "Var(sqrt(n) N^_n) = {:.4}, sigma^2 = {:.4}",
        last.scaled.variance,
        theory::sigma2(&p)?
    );
    println!(
        "Cov(N_n/2, N_n)/n = {:.4}, kernel = {:.4}",
        s.count_cov[0][1] / 10_000.0,
        theory::wst_covariance(&p, 0.5, 1.0)?
    );

    req.threads = 1;
    let one = run_ensemble(&req)?;
    req.threads = 3;
    let three = run_ensemble(&req)?;
    println!("1 thread and 3 threads agree: {}", one == three);
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
