// Closed-form first and second moments against the moment recursion.

use odl::moments::{self, MomentRequest};
use odl::ModelParams;

pub fn run_example() -> odl::Result<()> {
    let p = ModelParams::with_theta(0.3, 0.2, 1, 1)?;
    println!("n      E[N_n]          E[N_n^2]        recursion k=2   Var(N_n)");
    for n in [1u64, 2, 10, 100, 1000] {
        let m2 = moments::second_moment_n(&p, n);
        let rec = moments::moment_recursive(&p, n, 2)?;
        println!(
            "{n:<6} {:<15.6} {:<15.6} {:<15.6} {:.6}",
            moments::mean_n(&p, n),
            m2,
            rec,
            moments::variance_n(&p, n)
        );
    }

    let table = moments::exact_moments(&MomentRequest {
        params: p,
        times: vec![0, 1, 5],
        max_order: 4,
    })?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    // the sum of counts is what the C_n limit theorems are about
    println!("Var(N_1 + ... + N_1000) = {:.4}", moments::sum_counts_variance(&p, 1000));
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
