macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }
    };
}

example!(simulate_paths);
example!(exact_moments);
example!(dp_oracle);
example!(martingale_diagnostics);
example!(theory_summary);
example!(ensemble_clt);
example!(asclt_path);
example!(supercritical_w);
example!(verify_report);

#[test]
fn every_example_runs() {
    simulate_paths::run_example().expect("simulate_paths");
    exact_moments::run_example().expect("exact_moments");
    dp_oracle::run_example().expect("dp_oracle");
    martingale_diagnostics::run_example().expect("martingale_diagnostics");
    theory_summary::run_example().expect("theory_summary");
    ensemble_clt::run_example().expect("ensemble_clt");
    asclt_path::run_example().expect("asclt_path");
    supercritical_w::run_example().expect("supercritical_w");
    verify_report::run_example().expect("verify_report");
}
