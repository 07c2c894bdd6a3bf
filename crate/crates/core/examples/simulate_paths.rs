// One path in each regime, latent and marginal, and a trajectory CSV.
//
// ```bash
// cargo run --release --example simulate_paths
// ```

use odl::{simulate_trajectory, ModelParams, Mode, StrideSpec};

pub fn run_example() -> odl::Result<()> {
    for theta in [0.2, 0.5, 0.7] {
        let p = ModelParams::with_theta(0.2, theta, 1, 1)?;
        for mode in [Mode::Latent, Mode::Marginal] {
            let t = simulate_trajectory(&p, 100_000, 7, mode, StrideSpec::default());
            let last = t.last();
            println!(
                "{:<13} {:?}: N_n/T_n = {:.4} (limit {:.4}), {} samples",
                p.regime.as_str(),
                mode,
                last.count_a as f64 / p.total_at(last.step) as f64,
                p.limit_share(),
                t.samples.len()
            );
        }
    }

    let p = ModelParams::new(0.3, 0.3, 0.6, 0.0, 1, 1)?;
    let t = simulate_trajectory(&p, 20, 42, Mode::Marginal, StrideSpec::dense());
    let mut csv = Vec::new();
    t.write_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
