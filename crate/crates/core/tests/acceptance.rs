// Acceptance suite. Runs without the libtest harness so every criterion
// prints exactly one PASS/FAIL line; the process exits non-zero if any fails.
// All ensembles use master seed 42.

use std::process::{Command, Stdio};
use std::time::Instant;

use odl::ensemble::{run_ensemble, EnsembleRequest, EnsembleSummary, LilSpec};
use odl::harness::{regime_variance, verification_request, PATH_RATIO};
use odl::martingale::{hypergeom_series, quad_variation, v_limit};
use odl::moments::{mean_n, moment_recursive, second_moment_n};
use odl::oracle::{enumerate_distribution, exact_distribution};
use odl::params::ModelParams;
use odl::special::normal_cdf;
use odl::stats::sup_distance;
use odl::theory::{self, sigma2};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel(emp: f64, target: f64) -> f64 {
    (emp / target - 1.0).abs()
}

fn subcritical() -> ModelParams {
    ModelParams::with_theta(0.3, 0.2, 1, 1).unwrap()
}

// a = 0.2 at theta = 1/2 with a + b <= 1
fn critical() -> ModelParams {
    ModelParams::new(0.2, 0.8, 0.625, 0.0, 1, 1).unwrap()
}

fn supercritical(n0: u64) -> ModelParams {
    ModelParams::with_theta(0.2, 0.6, n0, 1).unwrap()
}

fn ensemble(p: ModelParams, horizon: u64, reps: u64, checkpoints: Vec<u64>) -> EnsembleSummary {
    let mut req = EnsembleRequest::new(p, horizon, reps, SEED);
    req.checkpoints = checkpoints;
    run_ensemble(&req).unwrap()
}

fn oracle_sets() -> Vec<ModelParams> {
    let mut sets = Vec::new();
    for theta in [-0.2, 0.0, 0.12, 0.3, 0.5, 0.6, 0.8] {
        for a in [0.1, 0.2, 0.3, 0.45] {
            for (n0, m0) in [(1, 1), (3, 2)] {
                if let Ok(p) = ModelParams::with_theta(a, theta, n0, m0) {
                    sets.push(p);
                }
            }
        }
    }
    sets
}

fn c1() -> Outcome {
    let sets = oracle_sets();
    let mut worst: f64 = 0.0;
    for p in &sets {
        for n in [1, 2, 5, 17, 64, 200] {
            let d = exact_distribution(p, n).unwrap();
            worst = worst.max(rel(mean_n(p, n), d.raw_moment(1)));
            worst = worst.max(rel(second_moment_n(p, n), d.raw_moment(2)));
            for k in 1..=4 {
                let r = moment_recursive(p, n, k).unwrap();
                worst = worst.max(rel(r, d.raw_moment(k as u32)));
            }
        }
    }
    outcome(
        sets.len() >= 20 && worst <= 1e-9,
        format!("{} parameter sets, worst relative gap {worst:.2e} (tol 1e-9)", sets.len()),
    )
}

fn c2() -> Outcome {
    let sets = [
        subcritical(),
        critical(),
        supercritical(2),
        ModelParams::with_theta(0.4, -0.2, 2, 3).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for p in &sets {
        for n in 0..=12 {
            let dp = exact_distribution(p, n).unwrap();
            let en = enumerate_distribution(p, n).unwrap();
            assert_eq!(dp.probabilities.len(), en.probabilities.len());
            for (x, y) in dp.probabilities.iter().zip(&en.probabilities) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("worst absolute gap {worst:.2e} over n <= 12 (tol 1e-12)"))
}

fn c3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [subcritical(), critical(), supercritical(1)] {
        let s = ensemble(p, 10_000, 100_000, vec![100, 1_000, 10_000]);
        let worst = s
            .checkpoints
            .iter()
            .map(|c| (c.z.mean - p.n0 as f64).abs() / c.z.stderr)
            .fold(0.0, f64::max);
        pass &= worst <= 4.0;
        parts.push(format!("{} {worst:.2} SE", p.regime.as_str()));
    }
    outcome(pass, format!("worst |mean Z - N0| per regime: {}", parts.join(", ")))
}

struct Sub {
    s: EnsembleSummary,
    sigma2: f64,
}

fn c4(sub: &Sub) -> Outcome {
    let c = sub.s.checkpoints.last().unwrap();
    let var = rel(c.scaled.variance, sub.sigma2);
    let mean = c.scaled.mean.abs() / c.scaled.stderr;
    let cov = rel(c.scaled_pair_cov, -sub.sigma2);
    outcome(
        var <= 0.05 && mean <= 4.0 && cov <= 0.05,
        format!(
            "var {:.5} ({:.2}%), mean {:.2} SE, pair cov {:.5} ({:.2}%) vs sigma2 {:.6}",
            c.scaled.variance,
            100.0 * var,
            mean,
            c.scaled_pair_cov,
            100.0 * cov,
            sub.sigma2
        ),
    )
}

fn c5(sub: &Sub) -> Outcome {
    let p = sub.s.params;
    let n = sub.s.horizon;
    let emp = sub.s.count_cov[0][1] / n as f64;
    let target = theory::wst_covariance(&p, 0.5, 1.0).unwrap();
    let gap = rel(emp, target);
    outcome(gap <= 0.10, format!("Cov at (1/2, 1) {emp:.5} vs {target:.5} ({:.2}%)", 100.0 * gap))
}

fn c6(crit: &EnsembleSummary) -> Outcome {
    let c = crit.checkpoints.last().unwrap();
    let target = theory::critical_variance(&crit.params).unwrap();
    let gap = rel(c.scaled.variance, target);
    outcome(
        gap <= 0.10,
        format!("var {:.5} vs 2a(1-2a) = {target:.5} ({:.2}%)", c.scaled.variance, 100.0 * gap),
    )
}

fn c7(w1: &EnsembleSummary, w2: &EnsembleSummary) -> Outcome {
    let stats = |s: &EnsembleSummary| {
        let r = s.w_estimates.len() as f64;
        let mean = s.w_estimates.iter().sum::<f64>() / r;
        let var = s.w_estimates.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (r - 1.0);
        let second = s.w_estimates.iter().map(|w| w * w).sum::<f64>() / r;
        (mean, (var / r).sqrt(), second)
    };
    let (m1, se1, second) = stats(w1);
    let (m2, se2, _) = stats(w2);
    let (_, target_second) = theory::w_moments(&w1.params).unwrap();
    let (target_mean2, _) = theory::w_moments(&w2.params).unwrap();
    let z1 = m1.abs() / se1;
    let gap = rel(second, target_second);
    let z2 = (m2 - target_mean2).abs() / se2;
    outcome(
        z1 <= 4.0 && gap <= 0.10 && z2 <= 4.0,
        format!(
            "N0=1 mean {m1:.4} ({z1:.2} SE), second {second:.4} vs {target_second:.4} ({:.2}%); N0=2 mean {m2:.4} vs {target_mean2:.5} ({z2:.2} SE)",
            100.0 * gap
        ),
    )
}

fn single_path(p: ModelParams) -> EnsembleSummary {
    let horizon = 1_000_000;
    let req = verification_request(&p, horizon, 2, SEED, horizon, PATH_RATIO).unwrap();
    run_ensemble(&req).unwrap()
}

fn asclt_sup(s: &EnsembleSummary) -> f64 {
    let ps = s.path_stats.as_ref().unwrap();
    let var = regime_variance(&theory::theory_summary(&s.params).unwrap());
    let target: Vec<f64> = ps.x_grid.iter().map(|&x| normal_cdf(x, var)).collect();
    sup_distance(&ps.asclt_cdf, &target)
}

fn c8(sub: &EnsembleSummary, crit: &EnsembleSummary) -> Outcome {
    let (ds, dc) = (asclt_sup(sub), asclt_sup(crit));
    outcome(
        ds <= 0.05 && dc <= 0.10,
        format!("sup distance subcritical {ds:.4} (tol 0.05), critical {dc:.4} (tol 0.10)"),
    )
}

fn c9(sub: &EnsembleSummary) -> Outcome {
    let ps = sub.path_stats.as_ref().unwrap();
    let s2 = sigma2(&sub.params).unwrap();
    let m1 = ps.moment_avgs.iter().find(|m| m.m == 1).unwrap().path0;
    let m2 = ps.moment_avgs.iter().find(|m| m.m == 2).unwrap().path0;
    let (g1, g2) = (rel(m1, s2), rel(m2, 3.0 * s2 * s2));
    outcome(
        g1 <= 0.10 && g2 <= 0.15,
        format!(
            "m=1 {m1:.4} vs {s2:.4} ({:.2}%), m=2 {m2:.4} vs {:.4} ({:.2}%)",
            100.0 * g1,
            3.0 * s2 * s2,
            100.0 * g2
        ),
    )
}

fn c10(sub: &Sub, crit: &EnsembleSummary, sup: &EnsembleSummary) -> Outcome {
    let cs = sub.s.checkpoints.last().unwrap();
    let sub_target = theory::cn_limits(&sub.s.params).unwrap().second;
    let g_sub = rel(cs.cn_scaled.variance, sub_target);
    let cc = crit.checkpoints.last().unwrap();
    let crit_target = theory::cn_limits(&crit.params).unwrap().second;
    let g_crit = rel(cc.cn_scaled.variance, crit_target);
    let corr = sup.checkpoints.last().unwrap().cn_corr;
    outcome(
        g_sub <= 0.10 && g_crit <= 0.15 && corr >= 0.95,
        format!(
            "subcritical var {:.4} vs {sub_target:.4} ({:.2}%), critical var {:.4} vs {crit_target:.4} ({:.2}%), supercritical corr {corr:.4}",
            cs.cn_scaled.variance,
            100.0 * g_sub,
            cc.cn_scaled.variance,
            100.0 * g_crit
        ),
    )
}

fn c11() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [subcritical(), critical(), supercritical(1)] {
        let mut req = EnsembleRequest::new(p, 1_000_000, 500, SEED);
        req.lil = Some(LilSpec {
            from: 1_000,
            ratio: odl::harness::LIL_RATIO,
        });
        let lil = run_ensemble(&req).unwrap().lil.unwrap();
        let ok = lil.exceedance_fraction > 0.0 && lil.exceedance_fraction < 0.5 && lil.median_max_ratio <= 1.5;
        pass &= ok;
        parts.push(format!(
            "{} exceedance {:.4} median max {:.3}",
            p.regime.as_str(),
            lil.exceedance_fraction,
            lil.median_max_ratio
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c12() -> Outcome {
    let n = 1_000_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [subcritical(), critical(), supercritical(1)] {
        let lim = v_limit(&p).unwrap();
        let ratio = quad_variation(&p, n) / lim.scaling.at(n as f64);
        let gap = rel(ratio, lim.constant);
        pass &= gap <= 0.01;
        parts.push(format!("{} {:.3}%", p.regime.as_str(), 100.0 * gap));
    }
    let p = supercritical(1);
    let vals: Vec<_> = [1e-6, 1e-9, 1e-12]
        .iter()
        .map(|&tol| hypergeom_series(p.t0_f(), p.theta, tol).unwrap())
        .collect();
    let consistent = vals
        .iter()
        .zip(&vals[1..])
        .all(|(x, y)| (x.value - y.value).abs() <= x.error_bound + y.error_bound);
    let zeta = hypergeom_series(1.0, 1.0, 1e-12).unwrap().value;
    let zeta_gap = (zeta - std::f64::consts::PI.powi(2) / 6.0).abs();
    pass &= consistent && zeta_gap <= 1e-10;
    outcome(
        pass,
        format!(
            "v_n gaps at n=1e6: {}; series consistent across tolerances: {consistent}; pi^2/6 gap {zeta_gap:.1e}",
            parts.join(", ")
        ),
    )
}

fn c13() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_odl"))
            .args([
                "verify", "--a", "0.3", "--b", "0.4", "--alpha", "0.5", "--beta", "0", "--n0", "1", "--m0", "1",
                "--horizon", "10000", "--replications", "1000", "--seed", "42", "--threads", threads, "--out",
            ])
            .arg(&out)
            .env_remove("ODL_THREADS")
            .stdout(Stdio::null())
            .status()
            .unwrap();
        (status.code(), out)
    };
    let (c1, d1) = run("1");
    let (c4, d4) = run("4");
    let mut same = c1 == c4;
    let files = ["report.json", "summary.json", "theory.json", "report.csv", "checkpoints.csv"];
    for f in files {
        same &= std::fs::read(d1.join(f)).ok() == std::fs::read(d4.join(f)).ok() && d1.join(f).exists();
    }
    outcome(same, format!("threads 1 vs 4, exit {c1:?}/{c4:?}, {} files compared", files.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, start: Instant, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("{tag} C{id:02} {name} [{:.1}s]: {}", start.elapsed().as_secs_f64(), o.detail);
    };

    let t = Instant::now();
    report(1, "closed forms vs exact law", t, c1());
    let t = Instant::now();
    report(2, "exact law vs path enumeration", t, c2());
    let t = Instant::now();
    report(3, "martingale mean", t, c3());

    let t = Instant::now();
    let p = subcritical();
    let sub = Sub {
        s: ensemble(p, 10_000, 10_000, vec![5_000, 10_000]),
        sigma2: sigma2(&p).unwrap(),
    };
    report(4, "subcritical CLT", t, c4(&sub));
    let t = Instant::now();
    report(5, "covariance kernel", t, c5(&sub));

    let t = Instant::now();
    let crit = ensemble(critical(), 100_000, 10_000, vec![100_000]);
    report(6, "critical variance", t, c6(&crit));

    let t = Instant::now();
    let w1 = ensemble(supercritical(1), 100_000, 10_000, vec![100_000]);
    let w2 = ensemble(supercritical(2), 100_000, 10_000, vec![100_000]);
    report(7, "supercritical W", t, c7(&w1, &w2));

    let t = Instant::now();
    let path_sub = single_path(subcritical());
    let path_crit = single_path(critical());
    report(8, "single-path log-averaged CDF", t, c8(&path_sub, &path_crit));
    let t = Instant::now();
    report(9, "pathwise moment averages", t, c9(&path_sub));

    let t = Instant::now();
    report(10, "C_n limits", t, c10(&sub, &crit, &w1));
    let t = Instant::now();
    report(11, "envelope exceedance", t, c11());
    let t = Instant::now();
    report(12, "v_n limits and series", t, c12());
    let t = Instant::now();
    report(13, "thread-count determinism", t, c13());

    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
