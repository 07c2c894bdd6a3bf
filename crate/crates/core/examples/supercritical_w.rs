// The almost-sure limit `W` for `theta > 1/2`: per-path estimates and
// their moments against the closed forms.

use odl::ensemble::{run_ensemble, EnsembleRequest};
use odl::{moments, theory, ModelParams};

pub fn run_example() -> odl::Result<()> {
    for n0 in [1u64, 2] {
        let p = ModelParams::with_theta(0.2, 0.6, n0, 1)?;
        let (m1, m2) = theory::w_moments(&p)?;
        let n = 20_000u64;
        let mut req = EnsembleRequest::new(p, n, 2_000, 5);
        req.checkpoints = vec![n / 10, n];
        let s = run_ensemble(&req)?;
        let r = s.w_estimates.len() as f64;
        let mean = s.w_estimates.iter().sum::<f64>() / r;
        let second = s.w_estimates.iter().map(|w| w * w).sum::<f64>() / r;
        let nf = n as f64;
        let t = p.total_at(n) as f64;
        let bias = moments::mean_n(&p, n) / t - p.limit_share();
        let exact2 = nf.powf(2.0 - 2.0 * p.theta) * (moments::variance_n(&p, n) / (t * t) + bias * bias);
        println!(
            "N0={n0}: mean {mean:.4} (E[W] {m1:.4}); second {second:.4} (exact at n {exact2:.4}, E[W^2] {m2:.4})"
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> odl::Result<()> {
    run_example()
}
