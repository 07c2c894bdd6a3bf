// Log-averaged empirical CDF and moment averages along one long path.

use odl::harness::{asclt_statistic, moment_average_statistic};
use odl::special::normal_cdf;
use odl::{simulate_trajectory, theory, ModelParams, Mode, StrideSpec};

pub fn run_example() -> odl::Result<()> {
    let p = ModelParams::with_theta(0.3, 0.2, 1, 1)?;
    let var = theory::sigma2(&p)?;
    let t = simulate_trajectory(&p, 200_000, 11, Mode::Marginal, StrideSpec::Geometric { ratio: 1.01 });
    let grid: Vec<f64> = (-4..=4).map(|k| 0.4 * k as f64).collect();
    let r = asclt_statistic(&t, &p, &grid)?;
    for (x, f) in grid.iter().zip(&r.self_normalised) {
        println!("x = {x:>5.2}: {f:.4} vs {:.4}", normal_cdf(*x, var));
    }
    println!("sup-distance {:.4}", r.sup_distance_to_normal(var));
    for m in [1, 2] {
        let a = moment_average_statistic(&t, &p, m)?;
        println!("m = {m}: {:.4} (limit {:.4})", a.value, a.limit);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
