//! Deterministic parallel ensembles.
//!
//! Replication `i` draws from its own generator seeded with
//! `replication_seed(master, i)`. Replications run on a rayon pool, results
//! are collected in index order and then reduced sequentially, so the output
//! does not depend on the number of workers.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{OdlError, Result};
use crate::harness::{self, AscltAccumulator, MomentAccumulator};
use crate::martingale;
use crate::model::{geometric_steps, Mode, Walker};
use crate::moments;
use crate::params::{ModelParams, Regime};
use crate::special::{ln_gamma_ratio, pochhammer_ratio};
use crate::stats::{median, CoMoment, Welford};
use crate::theory::{self, FluctScaling};

/// Default ceiling on stored per-replication checkpoint values.
pub const DEFAULT_CELL_BUDGET: u64 = 200_000_000;

/// SplitMix64 finaliser applied to `master + (index + 1) * golden`.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f(i)` for `i in 0..count` on `threads` workers (0 = rayon default)
/// and returns the results in index order.
pub fn par_map_indexed<T, F>(count: u64, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| OdlError::ResourceCap(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}

/// Settings for the envelope-exceedance scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LilSpec {
    pub from: u64,
    pub ratio: f64,
}

/// Settings for the pathwise log-averaged statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStatSpec {
    pub x_grid: Vec<f64>,
    pub moment_orders: Vec<u32>,
    /// geometric subsampling ratio for `j` (block weights keep the sums exact in weight)
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRequest {
    pub params: ModelParams,
    pub horizon: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub checkpoints: Vec<u64>,
    pub mode: Mode,
    pub threads: usize,
    pub lil: Option<LilSpec>,
    pub path_stats: Option<PathStatSpec>,
    pub cell_budget: u64,
}

impl EnsembleRequest {
    pub fn new(params: ModelParams, horizon: u64, replications: u64, master_seed: u64) -> Self {
        EnsembleRequest {
            params,
            horizon,
            replications,
            master_seed,
            checkpoints: vec![horizon],
            mode: Mode::Marginal,
            threads: 0,
            lil: None,
            path_stats: None,
            cell_budget: DEFAULT_CELL_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments2 {
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

impl From<&Welford> for Moments2 {
    fn from(w: &Welford) -> Self {
        Moments2 {
            mean: w.mean(),
            variance: w.variance(),
            stderr: w.std_err(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointStats {
    pub n: u64,
    pub count_a: Moments2,
    /// regime-scaled `N^_n`: `sqrt(n)`, `sqrt(n/log n)` or `n^(1-theta)`
    pub scaled: Moments2,
    /// sample covariance of the scaled `(N^_n, M^_n)` pair
    pub scaled_pair_cov: f64,
    /// second moment of the scaled `N^_n`
    pub scaled_second: f64,
    pub z: Moments2,
    pub cn_ratio: Moments2,
    /// `C_n/n - as_limit` scaled like `N^_n`
    pub cn_scaled: Moments2,
    /// sample correlation of the scaled `C_n` residual with the scaled `N^_n`
    pub cn_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LilStats {
    pub from: u64,
    pub points_per_path: u64,
    pub exceedance_fraction: f64,
    /// median over paths of `max_n |fluctuation| / envelope`
    pub median_max_ratio: f64,
    pub tail_completed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStats {
    pub x_grid: Vec<f64>,
    /// geometric subsampling ratio of `j`
    pub ratio: f64,
    /// replication 0, normalised by the realised weight sum
    pub asclt_cdf: Vec<f64>,
    /// replication 0, normalised by `log n` (sub) or `log log n` (critical)
    pub asclt_cdf_literal: Vec<f64>,
    /// mean over replications of the self-normalised CDF
    pub asclt_cdf_mean: Vec<f64>,
    /// per order: replication-0 value and ensemble moments of the literal statistic
    pub moment_avgs: Vec<MomentAverageStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentAverageStats {
    pub m: u32,
    pub path0: f64,
    pub path0_self_normalised: f64,
    pub ensemble: Moments2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub params: ModelParams,
    pub horizon: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub mode: Mode,
    pub checkpoints: Vec<CheckpointStats>,
    /// `Cov(N_{n_i}, N_{n_j})` over the checkpoint list
    pub count_cov: Vec<Vec<f64>>,
    /// supercritical: `n^(1-theta) N^_n` at the horizon, per replication
    pub w_estimates: Vec<f64>,
    /// supercritical: median `|W_n - W_horizon|` per checkpoint
    pub w_median_gap: Vec<f64>,
    pub lil: Option<LilStats>,
    pub path_stats: Option<PathStats>,
    /// scaled fluctuation at the last checkpoint, per replication
    #[serde(skip)]
    pub final_scaled: Vec<f64>,
}

struct PathRecord {
    counts: Vec<u64>,
    sums: Vec<f64>,
    lil: Option<(u64, f64)>,
    asclt: Option<(Vec<f64>, Vec<f64>)>,
    moments: Vec<(f64, f64)>,
}

/// Normalisation of `N^_n` for the regime.
pub fn scaled_fluctuation(p: &ModelParams, n: u64, count_a: u64) -> f64 {
    let nf = n as f64;
    let hat = count_a as f64 / p.total_at(n) as f64 - p.limit_share();
    match p.regime {
        Regime::Subcritical => hat * nf.sqrt(),
        Regime::Critical => hat * FluctScaling::SqrtOverLog.factor(nf),
        Regime::Supercritical => hat * nf.powf(1.0 - p.theta),
    }
}

/// `C_n / n` from the running sum `sum_{j<=n} N_j`.
pub fn cn_ratio(p: &ModelParams, n: u64, sum_counts: f64) -> f64 {
    let nf = n as f64;
    let sum_t = nf * p.t0_f() + nf * (nf + 1.0) / 2.0;
    (2.0 * sum_counts - sum_t) / (nf * nf)
}

pub fn run_ensemble(req: &EnsembleRequest) -> Result<EnsembleSummary> {
    let p = &req.params;
    if req.replications < 2 {
        return Err(OdlError::Config {
            field: "replications".into(),
            message: "need at least 2".into(),
        });
    }
    if req.horizon < 1 {
        return Err(OdlError::Config {
            field: "horizon".into(),
            message: "need at least 1 step".into(),
        });
    }
    let mut checkpoints: Vec<u64> = req
        .checkpoints
        .iter()
        .copied()
        .filter(|&n| n >= 1 && n <= req.horizon)
        .collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let cells = req.replications.saturating_mul(checkpoints.len() as u64);
    if cells > req.cell_budget {
        return Err(OdlError::ResourceCap(format!(
            "{} replications x {} checkpoints = {cells} cells exceeds budget {}",
            req.replications,
            checkpoints.len(),
            req.cell_budget
        )));
    }

    let lil_grid: Vec<u64> = match req.lil {
        Some(spec) => geometric_steps(spec.from.max(theory::lil_min_n(p.regime)), req.horizon, spec.ratio),
        None => Vec::new(),
    };
    let lil_env: Vec<f64> = lil_grid
        .iter()
        .map(|&n| theory::lil_envelope(p, n))
        .collect::<Result<_>>()?;
    let path_spec = match (&req.path_stats, p.regime) {
        (Some(s), Regime::Subcritical | Regime::Critical) => Some(s.clone()),
        _ => None,
    };
    let path_grid: Vec<u64> = match &path_spec {
        Some(s) => harness::block_grid(req.horizon, s.ratio),
        None => Vec::new(),
    };

    // all steps at which a path must stop, in order
    let mut stops: Vec<u64> = checkpoints.iter().chain(&lil_grid).chain(&path_grid).copied().collect();
    stops.push(req.horizon);
    stops.sort_unstable();
    stops.dedup();

    // supercritical tail completion of the martingale for the LIL residual
    let w_completion = match (req.lil, p.regime) {
        (Some(_), Regime::Supercritical) => {
            let v_inf = martingale::v_limit(p)?.constant;
            let v_h = martingale::quad_variation(p, req.horizon);
            let tail_sd = (p.limit_bernoulli_var() * (v_inf - v_h).max(0.0)).sqrt();
            let a_h = pochhammer_ratio(p.t0_f(), p.theta + p.t0_f(), req.horizon);
            let big_a_h = martingale::cumulative_a(p, req.horizon);
            Some((tail_sd, a_h, big_a_h))
        }
        _ => None,
    };

    let records = par_map_indexed(req.replications, req.threads, |i| {
        let seed = replication_seed(req.master_seed, i);
        let mut walker = Walker::new(p, req.mode, seed);
        let mut counts = Vec::with_capacity(checkpoints.len());
        let mut sums = Vec::with_capacity(checkpoints.len());
        let mut lil_values = Vec::with_capacity(lil_grid.len());
        let mut asclt = path_spec
            .as_ref()
            .map(|s| AscltAccumulator::new(p, s.x_grid.clone()));
        let mut moment_acc: Vec<MomentAccumulator> = path_spec
            .as_ref()
            .map(|s| s.moment_orders.iter().map(|&m| MomentAccumulator::new(p, m)).collect())
            .unwrap_or_default();
        let (mut ci, mut li, mut gi) = (0usize, 0usize, 0usize);
        let mut last_path_step = 0u64;
        for &s in &stops {
            walker.advance_to(s);
            let count = walker.count_a();
            if ci < checkpoints.len() && checkpoints[ci] == s {
                counts.push(count);
                sums.push(walker.sum_count_a());
                ci += 1;
            }
            if li < lil_grid.len() && lil_grid[li] == s {
                lil_values.push(count);
                li += 1;
            }
            if gi < path_grid.len() && path_grid[gi] == s {
                if let Some(acc) = asclt.as_mut() {
                    acc.add_block(last_path_step + 1, s, count);
                }
                for acc in moment_acc.iter_mut() {
                    acc.add_block(last_path_step + 1, s, count);
                }
                last_path_step = s;
                gi += 1;
            }
        }
        let lil = if lil_grid.is_empty() {
            None
        } else {
            let reference = match w_completion {
                Some((tail_sd, a_h, big_a_h)) => {
                    let mut g = Pcg64Mcg::seed_from_u64(replication_seed(!req.master_seed, i));
                    let z_h = a_h * walker.count_a() as f64 - p.a * big_a_h;
                    let gauss: f64 = StandardNormal.sample(&mut g);
                    Some(harness::w_from_martingale(p, z_h + tail_sd * gauss))
                }
                None => None,
            };
            let mut exceed = 0u64;
            let mut max_ratio = 0.0f64;
            for (k, &n) in lil_grid.iter().enumerate() {
                let mut fl = scaled_fluctuation(p, n, lil_values[k]);
                // back to the unscaled quantity the envelope bounds
                let nf = n as f64;
                fl /= match p.regime {
                    Regime::Subcritical => nf.sqrt(),
                    Regime::Critical => FluctScaling::SqrtOverLog.factor(nf),
                    Regime::Supercritical => 1.0,
                };
                if let Some(w) = reference {
                    fl -= w;
                }
                let ratio = fl.abs() / lil_env[k];
                if ratio > 1.0 {
                    exceed += 1;
                }
                max_ratio = max_ratio.max(ratio);
            }
            Some((exceed, max_ratio))
        };
        PathRecord {
            counts,
            sums,
            lil,
            asclt: asclt.map(|a| (a.self_normalised(), a.literal())),
            moments: moment_acc.iter().map(|m| (m.literal(), m.self_normalised())).collect(),
        }
    })?;

    summarise(req, &checkpoints, &lil_grid, path_spec.as_ref(), records)
}

fn summarise(
    req: &EnsembleRequest,
    checkpoints: &[u64],
    lil_grid: &[u64],
    path_spec: Option<&PathStatSpec>,
    records: Vec<PathRecord>,
) -> Result<EnsembleSummary> {
    let p = &req.params;
    let cn_limit = theory::cn_limits(p).map(|c| c.as_limit).unwrap_or(f64::NAN);
    let t0 = p.t0_f();
    let big_k = checkpoints.len();

    let mut stats = Vec::with_capacity(big_k);
    for (k, &n) in checkpoints.iter().enumerate() {
        let nf = n as f64;
        let a_n = pochhammer_ratio(t0, p.theta + t0, n);
        let big_a_n = martingale::cumulative_a(p, n);
        let scale = match p.regime {
            Regime::Subcritical => nf.sqrt(),
            Regime::Critical => FluctScaling::SqrtOverLog.factor(nf),
            Regime::Supercritical => nf.powf(1.0 - p.theta),
        };
        let (mut count_w, mut z_w, mut cn_w) = (Welford::new(), Welford::new(), Welford::new());
        let mut pair = CoMoment::default();
        let mut cn_pair = CoMoment::default();
        let mut second = 0.0;
        for r in &records {
            let c = r.counts[k];
            count_w.push(c as f64);
            z_w.push(a_n * c as f64 - p.a * big_a_n);
            let sn = scaled_fluctuation(p, n, c);
            let total = p.total_at(n) as f64;
            let sm = ((total - c as f64) / total - (1.0 - p.limit_share())) * scale;
            pair.push(sn, sm);
            second += sn * sn;
            let ratio = cn_ratio(p, n, r.sums[k]);
            cn_w.push(ratio);
            cn_pair.push((ratio - cn_limit) * scale, sn);
        }
        stats.push(CheckpointStats {
            n,
            count_a: (&count_w).into(),
            scaled: (&pair.x).into(),
            scaled_pair_cov: pair.covariance(),
            scaled_second: second / records.len() as f64,
            z: (&z_w).into(),
            cn_ratio: (&cn_w).into(),
            cn_scaled: (&cn_pair.x).into(),
            cn_corr: cn_pair.correlation(),
        });
    }

    let mut count_cov = vec![vec![0.0; big_k]; big_k];
    for i in 0..big_k {
        for j in i..big_k {
            let mut c = CoMoment::default();
            for r in &records {
                c.push(r.counts[i] as f64, r.counts[j] as f64);
            }
            count_cov[i][j] = c.covariance();
            count_cov[j][i] = count_cov[i][j];
        }
    }

    let (mut w_estimates, mut w_median_gap) = (Vec::new(), Vec::new());
    if p.regime == Regime::Supercritical && big_k > 0 {
        let last = big_k - 1;
        let h = checkpoints[last];
        w_estimates = records.iter().map(|r| scaled_fluctuation(p, h, r.counts[last])).collect();
        for (k, &n) in checkpoints.iter().enumerate() {
            let gaps: Vec<f64> = records
                .iter()
                .zip(&w_estimates)
                .map(|(r, w)| (scaled_fluctuation(p, n, r.counts[k]) - w).abs())
                .collect();
            w_median_gap.push(median(&gaps));
        }
    }

    let lil = if lil_grid.is_empty() {
        None
    } else {
        let exceed: u64 = records.iter().map(|r| r.lil.map_or(0, |l| l.0)).sum();
        let maxima: Vec<f64> = records.iter().map(|r| r.lil.map_or(f64::NAN, |l| l.1)).collect();
        Some(LilStats {
            from: lil_grid[0],
            points_per_path: lil_grid.len() as u64,
            exceedance_fraction: exceed as f64 / (lil_grid.len() as f64 * records.len() as f64),
            median_max_ratio: median(&maxima),
            tail_completed: p.regime == Regime::Supercritical,
        })
    };

    let path_stats = path_spec.map(|spec| {
        let g = spec.x_grid.len();
        let mut mean_cdf = vec![0.0; g];
        for r in &records {
            let (cdf, _) = r.asclt.as_ref().expect("asclt recorded for every path");
            for (m, v) in mean_cdf.iter_mut().zip(cdf) {
                *m += v;
            }
        }
        for m in mean_cdf.iter_mut() {
            *m /= records.len() as f64;
        }
        let (cdf0, lit0) = records[0].asclt.clone().expect("asclt recorded for every path");
        let moment_avgs = spec
            .moment_orders
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let w: Welford = records.iter().map(|r| r.moments[i].0).collect();
                MomentAverageStats {
                    m,
                    path0: records[0].moments[i].0,
                    path0_self_normalised: records[0].moments[i].1,
                    ensemble: (&w).into(),
                }
            })
            .collect();
        PathStats {
            x_grid: spec.x_grid.clone(),
            ratio: spec.ratio,
            asclt_cdf: cdf0,
            asclt_cdf_literal: lit0,
            asclt_cdf_mean: mean_cdf,
            moment_avgs,
        }
    });

    let final_scaled = match checkpoints.last() {
        Some(&h) => records.iter().map(|r| scaled_fluctuation(p, h, r.counts[big_k - 1])).collect(),
        None => Vec::new(),
    };

    Ok(EnsembleSummary {
        params: *p,
        horizon: req.horizon,
        replications: req.replications,
        master_seed: req.master_seed,
        mode: req.mode,
        checkpoints: stats,
        count_cov,
        w_estimates,
        w_median_gap,
        lil,
        path_stats,
        final_scaled,
    })
}

/// `E[W]`-style gamma factor `G(T0) / G(theta + T0)`.
pub fn w_scale(p: &ModelParams) -> f64 {
    ln_gamma_ratio(p.t0_f(), p.theta + p.t0_f()).exp()
}

/// Exact `E[N_n]` and `Var(N_n)` at each checkpoint.
pub fn exact_checkpoint_moments(p: &ModelParams, checkpoints: &[u64]) -> Vec<(f64, f64)> {
    let h = checkpoints.iter().copied().max().unwrap_or(0);
    let path = moments::mean_variance_path(p, h);
    checkpoints.iter().map(|&n| path[n as usize]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::with_theta(0.3, 0.2, 1, 1).unwrap()
    }

    #[test]
    fn seeds_are_distinct() {
        let mut s: Vec<u64> = (0..10_000).map(|i| replication_seed(42, i)).collect();
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 10_000);
        assert_ne!(replication_seed(1, 0), replication_seed(2, 0));
    }

    #[test]
    fn identical_across_worker_counts() {
        let mut req = EnsembleRequest::new(reference(), 1, 2, 7);
        let base = serde_json::to_string(&run_ensemble(&req).unwrap()).unwrap();
        for threads in [1, 2, 8] {
            req.threads = threads;
            assert_eq!(serde_json::to_string(&run_ensemble(&req).unwrap()).unwrap(), base);
        }
        let mut big = EnsembleRequest::new(reference(), 500, 64, 3);
        big.checkpoints = vec![10, 100, 500];
        big.lil = Some(LilSpec { from: 10, ratio: 1.2 });
        big.path_stats = Some(PathStatSpec {
            x_grid: vec![-1.0, 0.0, 1.0],
            moment_orders: vec![1],
            ratio: 1.05,
        });
        big.threads = 1;
        let one = serde_json::to_string(&run_ensemble(&big).unwrap()).unwrap();
        big.threads = 4;
        assert_eq!(serde_json::to_string(&run_ensemble(&big).unwrap()).unwrap(), one);
    }

    #[test]
    fn rejects_tiny_or_huge() {
        assert!(run_ensemble(&EnsembleRequest::new(reference(), 10, 1, 0)).is_err());
        let mut req = EnsembleRequest::new(reference(), 10, 100, 0);
        req.cell_budget = 50;
        assert!(matches!(run_ensemble(&req), Err(OdlError::ResourceCap(_))));
    }

    #[test]
    fn iid_variance() {
        let p = ModelParams::with_theta(0.5, 0.0, 1, 1).unwrap();
        let mut req = EnsembleRequest::new(p, 10_000, 4000, 11);
        req.checkpoints = vec![10_000];
        let s = run_ensemble(&req).unwrap();
        let v = s.checkpoints[0].count_a.variance;
        assert!((v / 2500.0 - 1.0).abs() < 0.07, "{v}");
    }

    #[test]
    fn cn_ratio_of_all_b_path() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 0.0, 1, 1).unwrap();
        let n = 1000u64;
        // N_j = 1 for all j
        let r = cn_ratio(&p, n, n as f64);
        assert!((r + 0.5).abs() < 3.0 / n as f64);
    }
}
