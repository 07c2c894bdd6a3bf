// The martingale `Z_n`, its predictable quadratic variation and the
// limit of `v_n` in each regime.

use odl::martingale::{self, martingale_path};
use odl::{simulate_trajectory, ModelParams, Mode, StrideSpec};

pub fn run_example() -> odl::Result<()> {
    for theta in [0.2, 0.5, 0.7] {
        let p = ModelParams::with_theta(0.2, theta, 1, 1)?;
        let t = simulate_trajectory(&p, 50_000, 3, Mode::Marginal, StrideSpec::dense());
        let d = martingale_path(&t, &p)?;
        let last = d.steps.len() - 1;
        let lim = martingale::v_limit(&p)?;
        let n = d.steps[last] as f64;
        println!(
            "{:<13} Z_n = {:>10.4}  v_n/scaling = {:.5} (limit {:.5})  <Z>_n / v_n = {:.4}",
            p.regime.as_str(),
            d.z_path[last],
            d.v_seq[last] / lim.scaling.at(n),
            lim.constant,
            d.predictable_qv[last] / d.v_seq[last]
        );
    }
    // theta = 1, T0 = 1 turns the series into sum 1/(j+1)^2
    let s = martingale::hypergeom_series(1.0, 1.0, 1e-13)?;
    println!(
        "series at theta=1, T0=1: {:.13} vs pi^2/6 = {:.13}",
        s.value,
        std::f64::consts::PI.powi(2) / 6.0
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
