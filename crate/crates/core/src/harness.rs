//! Pathwise statistics and the comparison of ensembles against theory.
//!
//! The log-averaged statistics use weights `w(j) = 1/j` (subcritical) or
//! `1/(j log j)`, `j >= 2` (critical) on the scaled fluctuation `S_j`
//! (`sqrt(j) N^_j` or `sqrt(j / log j) N^_j`). On a strided trajectory each
//! recorded step carries the summed weight of its block `(previous, step]`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    cn_ratio, exact_checkpoint_moments, run_ensemble, w_scale, EnsembleRequest, EnsembleSummary, LilSpec,
    PathStatSpec,
};
use crate::error::{OdlError, Result};
use crate::model::{geometric_steps, step_probability, Mode, Trajectory, Walker};
use crate::moments;
use crate::params::{ModelParams, Regime};
use crate::special::normal_cdf;
use crate::stats::sup_distance;
use crate::theory::{self, TheorySummary};

/// Blocks shorter than this are summed term by term.
const DIRECT_BLOCK: u64 = 64;

fn regime_weight(regime: Regime, j: f64) -> f64 {
    match regime {
        Regime::Critical => 1.0 / (j * j.ln()),
        _ => 1.0 / j,
    }
}

/// `sum_{j=lo}^{hi} w(j)`; the critical weight is zero at `j = 1`.
pub fn block_weight(regime: Regime, lo: u64, hi: u64) -> f64 {
    let lo = if regime == Regime::Critical { lo.max(2) } else { lo.max(1) };
    if hi < lo {
        return 0.0;
    }
    if hi - lo < DIRECT_BLOCK {
        return (lo..=hi).map(|j| regime_weight(regime, j as f64)).sum();
    }
    // midpoint rule on the antiderivative with the first Euler-Maclaurin correction
    let (a, b) = (lo as f64 - 0.5, hi as f64 + 0.5);
    let (integral, dw) = match regime {
        Regime::Critical => {
            let d = |x: f64| -(x.ln() + 1.0) / (x * x.ln()).powi(2);
            (b.ln().ln() - a.ln().ln(), d(b) - d(a))
        }
        _ => ((b / a).ln(), -1.0 / (b * b) + 1.0 / (a * a)),
    };
    integral - dw / 24.0
}

fn scaled_stat(p: &ModelParams, j: u64, count: u64) -> f64 {
    let jf = j as f64;
    let hat = count as f64 / p.total_at(j) as f64 - p.limit_share();
    match p.regime {
        Regime::Critical => hat * (jf / jf.ln()).sqrt(),
        _ => hat * jf.sqrt(),
    }
}

fn literal_norm(regime: Regime, n: u64) -> f64 {
    let nf = n as f64;
    match regime {
        Regime::Critical => nf.ln().ln(),
        _ => nf.ln(),
    }
}

fn require_diffusive(p: &ModelParams, what: &str) -> Result<()> {
    if p.regime == Regime::Supercritical {
        return Err(OdlError::RegimeMismatch(format!(
            "{what} applies to theta <= 1/2 (theta={})",
            p.theta
        )));
    }
    Ok(())
}

/// Streaming log-averaged empirical CDF.
#[derive(Debug, Clone)]
pub struct AscltAccumulator {
    regime: Regime,
    params: ModelParams,
    grid: Vec<f64>,
    mass: Vec<f64>,
    weight: f64,
    last: u64,
}

impl AscltAccumulator {
    pub fn new(p: &ModelParams, grid: Vec<f64>) -> Self {
        let g = grid.len();
        AscltAccumulator {
            regime: p.regime,
            params: *p,
            grid,
            mass: vec![0.0; g],
            weight: 0.0,
            last: 0,
        }
    }

    /// Adds the block `lo..=hi`, represented by the state `N_hi = count`.
    pub fn add_block(&mut self, lo: u64, hi: u64, count: u64) {
        let w = block_weight(self.regime, lo, hi);
        self.last = hi;
        if w == 0.0 {
            return;
        }
        let s = scaled_stat(&self.params, hi, count);
        for (m, &x) in self.mass.iter_mut().zip(&self.grid) {
            if s <= x {
                *m += w;
            }
        }
        self.weight += w;
    }

    pub fn self_normalised(&self) -> Vec<f64> {
        self.mass.iter().map(|m| m / self.weight).collect()
    }

    pub fn literal(&self) -> Vec<f64> {
        let norm = literal_norm(self.regime, self.last);
        self.mass.iter().map(|m| m / norm).collect()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight
    }
}

/// Streaming `sum w(j) S_j^(2m)`.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    params: ModelParams,
    m: u32,
    acc: f64,
    weight: f64,
    last: u64,
}

impl MomentAccumulator {
    pub fn new(p: &ModelParams, m: u32) -> Self {
        MomentAccumulator {
            params: *p,
            m,
            acc: 0.0,
            weight: 0.0,
            last: 0,
        }
    }

    pub fn add_block(&mut self, lo: u64, hi: u64, count: u64) {
        let w = block_weight(self.params.regime, lo, hi);
        self.last = hi;
        if w == 0.0 {
            return;
        }
        let s = scaled_stat(&self.params, hi, count);
        self.acc += w * s.powi(2 * self.m as i32);
        self.weight += w;
    }

    pub fn literal(&self) -> f64 {
        self.acc / literal_norm(self.params.regime, self.last)
    }

    pub fn self_normalised(&self) -> f64 {
        self.acc / self.weight
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AscltResult {
    pub x_grid: Vec<f64>,
    /// normalised by the realised weight sum
    pub self_normalised: Vec<f64>,
    /// normalised by `log n` (sub) or `log log n` (critical)
    pub literal: Vec<f64>,
    pub weight_sum: f64,
    pub literal_normalisation: f64,
    pub horizon: u64,
}

impl AscltResult {
    /// Sup-distance of the self-normalised CDF to `N(0, var)` on the grid.
    pub fn sup_distance_to_normal(&self, var: f64) -> f64 {
        let target: Vec<f64> = self.x_grid.iter().map(|&x| normal_cdf(x, var)).collect();
        sup_distance(&self.self_normalised, &target)
    }
}

fn for_each_block(traj: &Trajectory, mut f: impl FnMut(u64, u64, u64)) {
    let mut prev = 0u64;
    for s in traj.samples.iter().filter(|s| s.step >= 1) {
        f(prev + 1, s.step, s.count_a);
        prev = s.step;
    }
}

/// Log-averaged empirical CDF of the scaled fluctuation along one path.
pub fn asclt_statistic(traj: &Trajectory, p: &ModelParams, x_grid: &[f64]) -> Result<AscltResult> {
    require_diffusive(p, "the log-averaged CDF")?;
    if !traj.params.same_law(p) {
        return Err(OdlError::ParamsMismatch);
    }
    let mut acc = AscltAccumulator::new(p, x_grid.to_vec());
    for_each_block(traj, |lo, hi, c| acc.add_block(lo, hi, c));
    Ok(AscltResult {
        x_grid: x_grid.to_vec(),
        self_normalised: acc.self_normalised(),
        literal: acc.literal(),
        weight_sum: acc.weight_sum(),
        literal_normalisation: literal_norm(p.regime, traj.horizon),
        horizon: traj.horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentAverage {
    pub m: u32,
    /// normalised by `log n` (sub) or `log log n` (critical)
    pub value: f64,
    pub self_normalised: f64,
    pub limit: f64,
}

/// Pathwise log-average of `S_j^(2m)`; subcritically this is
/// `(1/log n) sum_j j^(m-1) N^_j^(2m)`.
pub fn moment_average_statistic(traj: &Trajectory, p: &ModelParams, m: u32) -> Result<MomentAverage> {
    require_diffusive(p, "the moment average")?;
    if m == 0 {
        return Err(OdlError::Domain("moment order m must be >= 1".into()));
    }
    let mut acc = MomentAccumulator::new(p, m);
    for_each_block(traj, |lo, hi, c| acc.add_block(lo, hi, c));
    Ok(MomentAverage {
        m,
        value: acc.literal(),
        self_normalised: acc.self_normalised(),
        limit: theory::even_moment_limit(p, m)?,
    })
}

/// Right ends of the blocks used to subsample `j = 1..=n`: `ceil(ratio^k)` plus `n`.
pub fn block_grid(n: u64, ratio: f64) -> Vec<u64> {
    let mut g = geometric_steps(1, n, ratio);
    if g.last() != Some(&n) {
        g.push(n);
    }
    g
}

/// Exact expectation of the `m = 1` literal moment average on `block_grid(n, ratio)`.
pub fn moment_average_expectation(p: &ModelParams, n: u64, ratio: f64) -> Result<f64> {
    require_diffusive(p, "the moment average")?;
    let mv = moments::mean_variance_path(p, n);
    let mut acc = 0.0;
    let mut prev = 0u64;
    for hi in block_grid(n, ratio) {
        let w = block_weight(p.regime, prev + 1, hi);
        prev = hi;
        if w == 0.0 {
            continue;
        }
        let (mu, var) = mv[hi as usize];
        let t = p.total_at(hi) as f64;
        let bias = mu / t - p.limit_share();
        let e_hat2 = var / (t * t) + bias * bias;
        let jf = hi as f64;
        let scale2 = match p.regime {
            Regime::Critical => jf / jf.ln(),
            _ => jf,
        };
        acc += w * scale2 * e_hat2;
    }
    Ok(acc / literal_norm(p.regime, n))
}

/// Steps up to which [`asclt_expected_cdf`] uses the exact law of `N_j`.
pub const EXACT_LAW_STEPS: u64 = 2000;

/// Expectation of the self-normalised log-averaged CDF on `block_grid(n, ratio)`.
///
/// The law of `N_j` is propagated exactly up to [`EXACT_LAW_STEPS`]; beyond
/// that a continuity-corrected Gaussian with the exact mean and variance is used.
pub fn asclt_expected_cdf(p: &ModelParams, n: u64, ratio: f64, x_grid: &[f64]) -> Result<Vec<f64>> {
    require_diffusive(p, "the log-averaged CDF")?;
    let mv = moments::mean_variance_path(p, n);
    let mut law = vec![1.0f64]; // law[i] = P(N_j = n0 + i)
    let mut j = 0u64;
    let mut mass = vec![0.0; x_grid.len()];
    let mut total = 0.0;
    let mut prev = 0u64;
    for hi in block_grid(n, ratio) {
        let w = block_weight(p.regime, prev + 1, hi);
        prev = hi;
        if hi <= EXACT_LAW_STEPS {
            while j < hi {
                let t = p.total_at(j);
                let mut next = vec![0.0; law.len() + 1];
                for (i, &q) in law.iter().enumerate() {
                    let up = step_probability(p, p.n0 + i as u64, t);
                    next[i + 1] += q * up;
                    next[i] += q * (1.0 - up);
                }
                law = next;
                j += 1;
            }
        }
        if w == 0.0 {
            continue;
        }
        total += w;
        if hi <= EXACT_LAW_STEPS {
            let stats: Vec<f64> = (0..law.len()).map(|i| scaled_stat(p, hi, p.n0 + i as u64)).collect();
            for (m, &x) in mass.iter_mut().zip(x_grid) {
                let cdf: f64 = law.iter().zip(&stats).filter(|(_, &s)| s <= x).map(|(q, _)| q).sum();
                *m += w * cdf;
            }
        } else {
            let (mu, var) = mv[hi as usize];
            let t = p.total_at(hi) as f64;
            let scale = scaled_stat(p, hi, 0) / (-p.limit_share());
            for (m, &x) in mass.iter_mut().zip(x_grid) {
                let c = t * (x / scale + p.limit_share());
                *m += w * normal_cdf(c.floor() + 0.5 - mu, var);
            }
        }
    }
    Ok(mass.into_iter().map(|m| m / total).collect())
}

/// `n^(1-theta) (N_n / T_n - a/(1-theta))` at the last recorded step.
pub fn estimate_w(traj: &Trajectory, p: &ModelParams) -> Result<f64> {
    if p.regime != Regime::Supercritical {
        return Err(OdlError::RegimeMismatch(format!(
            "W exists only for theta > 1/2 (theta={})",
            p.theta
        )));
    }
    let s = traj.last();
    if s.step == 0 {
        return Err(OdlError::Domain("W estimate needs at least one step".into()));
    }
    let hat = s.count_a as f64 / p.total_at(s.step) as f64 - p.limit_share();
    Ok((s.step as f64).powf(1.0 - p.theta) * hat)
}

/// `W` implied by a (possibly completed) value of the martingale `Z`.
pub fn w_from_martingale(p: &ModelParams, z: f64) -> f64 {
    (z - p.a * p.t0_f() / (1.0 - p.theta)) * w_scale(p)
}

/// `C_n = (1/n) sum_{j<=n} (N_j - M_j)` for `n = 1..=horizon`.
pub fn cn_path(traj: &Trajectory) -> Result<Vec<f64>> {
    if !traj.is_contiguous() {
        return Err(OdlError::StrideIncompatible(
            "C_n needs every step for its prefix sums".into(),
        ));
    }
    let mut out = Vec::with_capacity(traj.horizon as usize);
    let mut sum = 0i64;
    for s in &traj.samples[1..] {
        sum += s.count_a as i64 - s.count_b as i64;
        out.push(sum as f64 / s.step as f64);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// standard errors allowed for mean comparisons
    pub mean_se: f64,
    /// relative tolerance for variances and second moments
    pub variance_rel: f64,
    /// relative tolerance for the two-time covariance
    pub kernel_rel: f64,
    /// sup-distance for the log-averaged CDF
    pub asclt_sup: f64,
    /// relative tolerance for the C_n CLT variance
    pub cn_var_rel: f64,
    /// absolute tolerance for the a.s. limit of C_n / n
    pub cn_limit_abs: f64,
    /// minimum correlation of the C_n residual with W
    pub correlation_min: f64,
    /// upper end of the admissible envelope-exceedance band (lower end is 0, exclusive)
    pub lil_upper: f64,
    /// ceiling for the median of per-path max |fluctuation| / envelope
    pub lil_max_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mean_se: 4.0,
            variance_rel: 0.10,
            kernel_rel: 0.10,
            asclt_sup: 0.05,
            cn_var_rel: 0.10,
            cn_limit_abs: 0.01,
            correlation_min: 0.95,
            lil_upper: 0.5,
            lil_max_ratio: 1.5,
        }
    }
}

impl Tolerances {
    /// Every tolerance set to zero; statistical checks then fail.
    pub fn zero() -> Self {
        Tolerances {
            mean_se: 0.0,
            variance_rel: 0.0,
            kernel_rel: 0.0,
            asclt_sup: 0.0,
            cn_var_rel: 0.0,
            cn_limit_abs: 0.0,
            correlation_min: 1.0,
            lil_upper: 0.0,
            lil_max_ratio: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TolKind {
    /// `|emp - theory| <= tol * stderr`
    StdErr,
    /// `|emp / theory - 1| <= tol`
    Relative,
    /// `|emp - theory| <= tol`
    Absolute,
    /// `emp >= tol`
    Minimum,
    /// `emp <= tol`
    Maximum,
    /// `0 < emp < tol`
    OpenBand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub name: String,
    /// which limit statement the row exercises
    pub claim: String,
    pub n: u64,
    pub theoretical: f64,
    pub empirical: f64,
    pub tolerance: f64,
    pub tolerance_kind: TolKind,
    pub stderr: Option<f64>,
    pub passed: bool,
    /// informational rows do not affect the verdict
    pub enforced: bool,
    pub note: Option<String>,
}

impl CheckRow {
    #[allow(clippy::too_many_arguments)]
    fn new(
        name: &str,
        claim: &str,
        n: u64,
        theoretical: f64,
        empirical: f64,
        tolerance: f64,
        kind: TolKind,
        stderr: Option<f64>,
    ) -> Self {
        let passed = match kind {
            TolKind::StdErr => (empirical - theoretical).abs() <= tolerance * stderr.unwrap_or(f64::NAN),
            TolKind::Relative => (empirical / theoretical - 1.0).abs() <= tolerance,
            TolKind::Absolute => (empirical - theoretical).abs() <= tolerance,
            TolKind::Minimum => empirical >= tolerance,
            TolKind::Maximum => empirical <= tolerance,
            TolKind::OpenBand => empirical > 0.0 && empirical < tolerance,
        };
        CheckRow {
            name: name.into(),
            claim: claim.into(),
            n,
            theoretical,
            empirical,
            tolerance,
            tolerance_kind: kind,
            stderr,
            passed,
            enforced: true,
            note: None,
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.note = Some(s.into());
        self
    }

    fn informational(mut self) -> Self {
        self.enforced = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub params: ModelParams,
    pub regime: Regime,
    pub horizon: u64,
    pub replications: u64,
    pub master_seed: u64,
    pub rows: Vec<CheckRow>,
    pub nothing_verified: bool,
    pub all_passed: bool,
    pub warnings: Vec<String>,
}

/// Limiting variance of the scaled fluctuation in the summary's regime.
pub fn regime_variance(t: &TheorySummary) -> f64 {
    t.sigma2.or(t.crit_var).or(t.fluct_var).unwrap_or(f64::NAN)
}

/// Rows for the time-averaged imbalance `C_n`.
pub fn cn_checks(summary: &EnsembleSummary, theory: &TheorySummary, tol: &Tolerances) -> Vec<CheckRow> {
    let Some(last) = summary.checkpoints.last() else {
        return Vec::new();
    };
    let n = last.n;
    let mut rows = vec![CheckRow::new(
        "cn_limit",
        "a.s. limit of C_n / n",
        n,
        theory.cn_limit,
        last.cn_ratio.mean,
        tol.cn_limit_abs,
        TolKind::Absolute,
        Some(last.cn_ratio.stderr),
    )];
    match theory.regime {
        Regime::Subcritical | Regime::Critical => {
            let v = theory.cn_clt_var.unwrap_or(f64::NAN);
            rows.push(CheckRow::new(
                "cn_clt_variance",
                "CLT for C_n / n",
                n,
                v,
                last.cn_scaled.variance,
                tol.cn_var_rel,
                TolKind::Relative,
                None,
            ));
        }
        Regime::Supercritical => {
            rows.push(
                CheckRow::new(
                    "cn_w_correlation",
                    "n^(1-theta) (C_n/n - limit) -> 2W/(1+theta)",
                    n,
                    1.0,
                    last.cn_corr,
                    tol.correlation_min,
                    TolKind::Minimum,
                    None,
                )
                .note("sample correlation with the W estimate at the same horizon"),
            );
        }
    }
    rows
}

/// Builds one report row per applicable limit statement. Pure in its inputs.
pub fn compare_to_theory(
    summary: &EnsembleSummary,
    theory: &TheorySummary,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    if !summary.params.same_law(&theory.params) {
        return Err(OdlError::ParamsMismatch);
    }
    let p = &summary.params;
    let mut report = VerificationReport {
        params: *p,
        regime: p.regime,
        horizon: summary.horizon,
        replications: summary.replications,
        master_seed: summary.master_seed,
        rows: Vec::new(),
        nothing_verified: true,
        all_passed: true,
        warnings: p.warnings(),
    };
    let Some(last) = summary.checkpoints.last() else {
        report.warnings.push("nothing verified: empty checkpoint list".into());
        return Ok(report);
    };
    let n = last.n;
    let rows = &mut report.rows;

    let exact = exact_checkpoint_moments(p, &[n])[0];
    rows.push(CheckRow::new(
        "mean_count",
        "exact finite-n mean of N_n",
        n,
        exact.0,
        last.count_a.mean,
        tol.mean_se,
        TolKind::StdErr,
        Some(last.count_a.stderr),
    ));
    rows.push(CheckRow::new(
        "martingale_mean",
        "E[Z_n] = N0",
        n,
        p.n0 as f64,
        last.z.mean,
        tol.mean_se,
        TolKind::StdErr,
        Some(last.z.stderr),
    ));

    let var = regime_variance(theory);
    match p.regime {
        Regime::Subcritical | Regime::Critical => {
            let claim = if p.regime == Regime::Subcritical {
                "CLT: sqrt(n) N^_n -> N(0, sigma^2)"
            } else {
                "CLT: sqrt(n / log n) N^_n -> N(0, 2a(1-2a))"
            };
            let nf = n as f64;
            let scale = match p.regime {
                Regime::Critical => (nf / nf.ln()).sqrt(),
                _ => nf.sqrt(),
            };
            let exact_scaled = scale * (exact.0 / p.total_at(n) as f64 - p.limit_share());
            rows.push(
                CheckRow::new(
                    "clt_mean",
                    claim,
                    n,
                    exact_scaled,
                    last.scaled.mean,
                    tol.mean_se,
                    TolKind::StdErr,
                    Some(last.scaled.stderr),
                )
                .note("theoretical = exact finite-n mean of the scaled fluctuation; the limit is 0"),
            );
            rows.push(CheckRow::new(
                "clt_variance",
                claim,
                n,
                var,
                last.scaled.variance,
                tol.variance_rel,
                TolKind::Relative,
                None,
            ));
            rows.push(CheckRow::new(
                "pair_covariance",
                "fluctuation pair is (N^, -N^)",
                n,
                -var,
                last.scaled_pair_cov,
                tol.variance_rel,
                TolKind::Relative,
                None,
            ));
            if p.regime == Regime::Subcritical {
                let half = n / 2;
                if let Some(i) = summary.checkpoints.iter().position(|c| c.n == half) {
                    let j = summary.checkpoints.len() - 1;
                    let emp = summary.count_cov[i][j] / n as f64;
                    rows.push(CheckRow::new(
                        "kernel_covariance",
                        "two-time covariance s (t/s)^theta sigma^2 at (1/2, 1)",
                        n,
                        theory::wst_covariance(p, 0.5, 1.0)?,
                        emp,
                        tol.kernel_rel,
                        TolKind::Relative,
                        None,
                    ));
                }
            }
            if let Some(ps) = &summary.path_stats {
                let target: Vec<f64> = ps.x_grid.iter().map(|&x| normal_cdf(x, var)).collect();
                let expected = asclt_expected_cdf(p, n, ps.ratio, &ps.x_grid)?;
                rows.push(
                    CheckRow::new(
                        "asclt_sup_mean",
                        "log-averaged empirical CDF -> Gaussian CDF",
                        n,
                        0.0,
                        sup_distance(&ps.asclt_cdf_mean, &expected),
                        tol.asclt_sup,
                        TolKind::Maximum,
                        None,
                    )
                    .note(format!(
                        "ensemble mean of the self-normalised statistic against its exact finite-n expectation; \
                         that expectation is {:.4} from the limit CDF",
                        sup_distance(&expected, &target)
                    )),
                );
                rows.push(
                    CheckRow::new(
                        "asclt_sup_limit",
                        "log-averaged empirical CDF -> Gaussian CDF",
                        n,
                        0.0,
                        sup_distance(&ps.asclt_cdf_mean, &target),
                        tol.asclt_sup,
                        TolKind::Maximum,
                        None,
                    )
                    .note("ensemble mean against the limit CDF")
                    .informational(),
                );
                rows.push(
                    CheckRow::new(
                        "asclt_sup_path0",
                        "log-averaged empirical CDF -> Gaussian CDF",
                        n,
                        0.0,
                        sup_distance(&ps.asclt_cdf, &target),
                        tol.asclt_sup,
                        TolKind::Maximum,
                        None,
                    )
                    .note("single path (replication 0)")
                    .informational(),
                );
                if let Some(m1) = ps.moment_avgs.iter().find(|m| m.m == 1) {
                    let expected = moment_average_expectation(p, n, ps.ratio)?;
                    let limit = theory::even_moment_limit(p, 1)?;
                    rows.push(
                        CheckRow::new(
                            "moment_avg_m1",
                            "pathwise log-average of S_j^2",
                            n,
                            expected,
                            m1.ensemble.mean,
                            tol.mean_se,
                            TolKind::StdErr,
                            Some(m1.ensemble.stderr),
                        )
                        .note(format!(
                            "theoretical = exact finite-n expectation; limit constant {limit:.6}, limit_gap {:.4}",
                            expected / limit - 1.0
                        )),
                    );
                }
            }
        }
        Regime::Supercritical => {
            let (m1, m2) = (theory.w_mean.unwrap_or(f64::NAN), theory.w_second.unwrap_or(f64::NAN));
            let r = summary.w_estimates.len() as f64;
            let mean = summary.w_estimates.iter().sum::<f64>() / r;
            let sq: Vec<f64> = summary.w_estimates.iter().map(|w| w * w).collect();
            let second = sq.iter().sum::<f64>() / r;
            let se = (crate::stats::two_pass_variance(&summary.w_estimates) / r).sqrt();
            let se2 = (crate::stats::two_pass_variance(&sq) / r).sqrt();
            // exact finite-n moments of n^(1-theta) N^_n, which converge to those of W
            let nf = n as f64;
            let t = p.total_at(n) as f64;
            let bias = exact.0 / t - p.limit_share();
            let s2 = nf.powf(2.0 - 2.0 * p.theta);
            let (e1, e2) = (nf.powf(1.0 - p.theta) * bias, s2 * (exact.1 / (t * t) + bias * bias));
            rows.push(
                CheckRow::new("w_mean", "E[W]", n, e1, mean, tol.mean_se, TolKind::StdErr, Some(se))
                    .note(format!("theoretical = exact finite-n mean; limit E[W] = {m1:.6}")),
            );
            rows.push(
                CheckRow::new("w_second", "E[W^2]", n, e2, second, tol.variance_rel, TolKind::Relative, Some(se2))
                    .note(format!(
                        "theoretical = exact finite-n second moment; limit E[W^2] = {m2:.6}, limit_gap {:.4}",
                        e2 / m2 - 1.0
                    )),
            );
            rows.push(
                CheckRow::new("w_mean_limit", "E[W]", n, m1, mean, tol.mean_se, TolKind::StdErr, Some(se))
                    .informational(),
            );
            rows.push(
                CheckRow::new(
                    "w_second_limit",
                    "E[W^2]",
                    n,
                    m2,
                    second,
                    tol.variance_rel,
                    TolKind::Relative,
                    Some(se2),
                )
                .informational(),
            );
            let g = &summary.w_median_gap;
            if g.len() >= 3 {
                rows.push(
                    CheckRow::new(
                        "w_convergence",
                        "n^(1-theta) N^_n converges a.s.",
                        n,
                        g[0],
                        g[g.len() - 2],
                        g[0],
                        TolKind::Maximum,
                        None,
                    )
                    .note("median |W_n - W_horizon| at the penultimate vs the first checkpoint"),
                );
            }
        }
    }

    rows.extend(cn_checks(summary, theory, tol));

    if let Some(l) = &summary.lil {
        let what = if l.tail_completed {
            "LIL envelope for the residual n^(1-theta) N^_n - W (W by tail completion)"
        } else {
            "LIL envelope"
        };
        rows.push(
            CheckRow::new(
                "lil_exceedance",
                what,
                n,
                f64::NAN,
                l.exceedance_fraction,
                tol.lil_upper,
                TolKind::OpenBand,
                None,
            )
            .note(format!("{} checkpoints per path from n={}", l.points_per_path, l.from)),
        );
        rows.push(CheckRow::new(
            "lil_max_ratio",
            what,
            n,
            1.0,
            l.median_max_ratio,
            tol.lil_max_ratio,
            TolKind::Maximum,
            None,
        ));
    }

    report.nothing_verified = report.rows.iter().all(|r| !r.enforced);
    report.all_passed = report.rows.iter().filter(|r| r.enforced).all(|r| r.passed);
    Ok(report)
}

/// Geometric subsampling ratio for the pathwise statistics in ensembles.
pub const PATH_RATIO: f64 = 1.01;

/// Ratio of the geometric envelope grid used by `verify`.
pub const LIL_RATIO: f64 = 1.1;

/// Ensemble request with every regime-appropriate statistic switched on:
/// checkpoints at `n/100`, `n/10`, `n/2` and `n`, an envelope grid from
/// `lil_from`, and pathwise statistics on 13 points spanning +-3 sd.
pub fn verification_request(
    p: &ModelParams,
    horizon: u64,
    replications: u64,
    master_seed: u64,
    lil_from: u64,
    path_ratio: f64,
) -> Result<EnsembleRequest> {
    let mut req = EnsembleRequest::new(*p, horizon, replications, master_seed);
    req.checkpoints = vec![horizon / 100, horizon / 10, horizon / 2, horizon];
    if lil_from < horizon {
        req.lil = Some(LilSpec {
            from: lil_from,
            ratio: LIL_RATIO,
        });
    }
    if p.regime != Regime::Supercritical {
        let sd = regime_variance(&theory::theory_summary(p)?).sqrt();
        req.path_stats = Some(PathStatSpec {
            x_grid: (-6..=6).map(|k| 0.5 * k as f64 * sd).collect(),
            moment_orders: vec![1, 2],
            ratio: path_ratio,
        });
    }
    Ok(req)
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub summary: EnsembleSummary,
    pub theory: TheorySummary,
    pub report: VerificationReport,
}

pub fn run_verification(req: &EnsembleRequest, tol: &Tolerances) -> Result<Verification> {
    let summary = run_ensemble(req)?;
    let theory = theory::theory_summary(&req.params)?;
    let report = compare_to_theory(&summary, &theory, tol)?;
    Ok(Verification {
        summary,
        theory,
        report,
    })
}

/// `C_n / n` along one path at geometric steps, without storing the path.
pub fn cn_trace(p: &ModelParams, horizon: u64, seed: u64, mode: Mode, ratio: f64) -> Vec<(u64, f64)> {
    let mut walker = Walker::new(p, mode, seed);
    geometric_steps(1, horizon, ratio)
        .into_iter()
        .chain(std::iter::once(horizon))
        .filter(|&s| s >= 1)
        .map(|s| {
            walker.advance_to(s);
            (s, cn_ratio(p, s, walker.sum_count_a()))
        })
        .fold(Vec::new(), |mut acc, x| {
            if acc.last().map(|l: &(u64, f64)| l.0) != Some(x.0) {
                acc.push(x);
            }
            acc
        })
}
