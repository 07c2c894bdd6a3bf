//! Finite-time moments of `N_n`.
//!
//! Closed forms are products of Pochhammer ratios evaluated through
//! [`crate::special`]. The general moment recursion advances all orders
//! `1..=k` together, since order `k` at step `j + 1` needs every lower order
//! at step `j`.

use std::io::Write;

use serde::Serialize;

use crate::error::{OdlError, Result};
use crate::params::ModelParams;
use crate::special::pochhammer_ratio;

pub const MAX_ORDER: usize = 12;

/// Below this distance from the poles at `theta = 1/2` and `theta = 1` the
/// closed forms are replaced by the recursion.
pub const POLE_TOL: f64 = 1e-9;

fn near_unit_theta(p: &ModelParams) -> bool {
    (1.0 - p.theta).abs() < POLE_TOL
}

/// `E[N_n]`.
pub fn mean_n(p: &ModelParams, n: u64) -> f64 {
    if n == 0 {
        return p.n0 as f64;
    }
    if near_unit_theta(p) {
        return moment_path(p, n, 1).expect("order 1 is within the cap")[0];
    }
    let t0 = p.t0_f();
    let q = p.a / (1.0 - p.theta);
    pochhammer_ratio(p.theta + t0, t0, n) * (p.n0 as f64 - q * t0) + q * p.total_at(n) as f64
}

/// The five bracketed groups of the closed-form second moment,
/// `E[N_n^2] = prefactor * (n0_sq + g2 + g3 + g4 + g5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMomentTerms {
    /// `(2 theta + T0)_n / (T0)_n`
    pub prefactor: f64,
    pub n0_sq: f64,
    pub g2: f64,
    pub g3: f64,
    pub g4: f64,
    pub g5: f64,
}

impl SecondMomentTerms {
    pub fn total(&self) -> f64 {
        self.prefactor * (self.n0_sq + self.g2 + self.g3 + self.g4 + self.g5)
    }
}

/// Group-by-group evaluation. `None` near `theta = 1/2` or `theta = 1`, where
/// the groups have poles.
pub fn second_moment_terms(p: &ModelParams, n: u64) -> Option<SecondMomentTerms> {
    let th = p.theta;
    if (2.0 * th - 1.0).abs() < POLE_TOL || near_unit_theta(p) {
        return None;
    }
    let a = p.a;
    let t0 = p.t0_f();
    let n0 = p.n0 as f64;
    let u = 2.0 * th + t0;
    let c = n0 - a * t0 / (1.0 - th);

    // ratios against (u)_n
    let r_t0_next = t0 * pochhammer_ratio(t0 + 1.0, u, n); // (T0)_{n+1} / (u)_n
    let r_t0_2 = pochhammer_ratio(t0 + 2.0, u, n); // (T0+2)_n / (u)_n
    let r_th = pochhammer_ratio(th + t0, u, n); // (theta+T0)_n / (u)_n
    let r_th_next = (th + t0 + n as f64) * r_th; // (theta+T0)_{n+1} / (u)_n

    let g2 = c * ((1.0 - 2.0 * a) - 2.0 * a * (th + t0) / (1.0 - th));
    let g3 = a * (1.0 - 2.0 * a) / ((1.0 - th) * (2.0 * th - 1.0)) * (t0 - r_t0_next);
    let g4 = -a * a / (1.0 - th).powi(2) * t0 * (t0 + 1.0) * (1.0 - r_t0_2);
    let g5 = c * (2.0 * a / (1.0 - th) * r_th_next - (1.0 - 2.0 * a) * r_th);
    Some(SecondMomentTerms {
        prefactor: pochhammer_ratio(u, t0, n),
        n0_sq: n0 * n0,
        g2,
        g3,
        g4,
        g5,
    })
}

/// `E[N_n^2]`; falls back to the recursion at the poles.
pub fn second_moment_n(p: &ModelParams, n: u64) -> f64 {
    if n == 0 {
        return (p.n0 * p.n0) as f64;
    }
    match second_moment_terms(p, n) {
        Some(t) => t.total(),
        None => moment_path(p, n, 2).expect("order 2 is within the cap")[1],
    }
}

fn binomials(k: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; k + 2]; k + 2];
    for i in 0..=k + 1 {
        c[i][0] = 1.0;
        for j in 1..=i {
            c[i][j] = c[i - 1][j - 1] + if j < i { c[i - 1][j] } else { 0.0 };
        }
    }
    c
}

/// Advances `moments[r-1] = E[N_j^r]`, r = 1..=k, from step `j` to `j + 1`.
fn recursion_step(moments: &mut [f64], binom: &[Vec<f64>], a: f64, theta: f64, t_j: f64) {
    let k = moments.len();
    let s = theta / t_j;
    // higher orders read lower ones at step j, so update from the top down
    for order in (1..=k).rev() {
        let mut next = moments[order - 1] * (1.0 + order as f64 * s) + a;
        for i in 1..order {
            let coef = a * binom[order][i] + s * binom[order][i + 1];
            next += coef * moments[order - i - 1];
        }
        moments[order - 1] = next;
    }
}

fn check_order(k: usize) -> Result<()> {
    if k == 0 || k > MAX_ORDER {
        return Err(OdlError::OrderCapExceeded {
            order: k,
            cap: MAX_ORDER,
        });
    }
    Ok(())
}

/// `[E[N_n], ..., E[N_n^k]]` by the moment recursion.
pub fn moment_path(p: &ModelParams, n: u64, k: usize) -> Result<Vec<f64>> {
    check_order(k)?;
    let binom = binomials(k);
    let n0 = p.n0 as f64;
    let mut m: Vec<f64> = (1..=k).map(|r| n0.powi(r as i32)).collect();
    for j in 0..n {
        recursion_step(&mut m, &binom, p.a, p.theta, p.total_at(j) as f64);
    }
    Ok(m)
}

/// `E[N_n^k]` by the moment recursion.
pub fn moment_recursive(p: &ModelParams, n: u64, k: usize) -> Result<f64> {
    Ok(moment_path(p, n, k)?[k - 1])
}

/// `(E[N_n], E[M_n])`.
pub fn mean_vector(p: &ModelParams, n: u64) -> (f64, f64) {
    let en = mean_n(p, n);
    (en, p.total_at(n) as f64 - en)
}

/// `E[(N_n, M_n)^T (N_n, M_n)]`, assembled from `E[N_n]`, `E[N_n^2]` and `T_n`.
pub fn second_matrix(p: &ModelParams, n: u64) -> [[f64; 2]; 2] {
    let t = p.total_at(n) as f64;
    let en = mean_n(p, n);
    let en2 = second_moment_n(p, n);
    let nm = t * en - en2;
    [[en2, nm], [nm, t * t - 2.0 * t * en + en2]]
}

/// `(E[N_j], Var(N_j))` for `j = 0..=n`.
///
/// Uses `Var(N_{j+1}) = (1 + 2 theta / T_j) Var(N_j) + p_j (1 - p_j)` with
/// `p_j = a + theta E[N_j] / T_j`, which has no cancellation at large `j`.
pub fn mean_variance_path(p: &ModelParams, n: u64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let (mut mu, mut var) = (p.n0 as f64, 0.0);
    out.push((mu, var));
    for j in 0..n {
        let t = p.total_at(j) as f64;
        let pj = p.a + p.theta * mu / t;
        var = var * (1.0 + 2.0 * p.theta / t) + pj * (1.0 - pj);
        mu += pj;
        out.push((mu, var));
    }
    out
}

pub fn variance_n(p: &ModelParams, n: u64) -> f64 {
    mean_variance_path(p, n)[n as usize].1
}

/// `Cov(N_i, N_j)` for `i <= j`.
///
/// `E[N_j | F_i]` is affine in `N_i` with slope `(theta+T_i)_{j-i} / (T_i)_{j-i}`.
pub fn covariance_n(p: &ModelParams, i: u64, j: u64) -> f64 {
    let (i, j) = (i.min(j), i.max(j));
    let ti = p.total_at(i) as f64;
    pochhammer_ratio(p.theta + ti, ti, j - i) * variance_n(p, i)
}

/// `Var(sum_{j=1}^n N_j)`.
pub fn sum_counts_variance(p: &ModelParams, n: u64) -> f64 {
    let mv = mean_variance_path(p, n);
    // slope s_j = E[N_j | F_i] slope from i to j; cumulative products of (1 + theta/T)
    // kept as g_j = prod_{l<j} (1 + theta/T_l), so slope(i -> j) = g_j / g_i
    let mut log_g = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0f64;
    log_g.push(0.0);
    for l in 0..n {
        acc += (p.theta / p.total_at(l) as f64).ln_1p();
        log_g.push(acc);
    }
    // suffix sums of g_j over j > i, scaled by g_i on the fly
    let mut suffix = 0.0f64; // sum_{j>i} g_j / g_n
    let mut total = 0.0;
    for i in (1..=n as usize).rev() {
        let var_i = mv[i].1;
        let rel = (log_g[n as usize] - log_g[i]).exp(); // g_n / g_i
        total += var_i * (1.0 + 2.0 * suffix * rel);
        suffix += (log_g[i] - log_g[n as usize]).exp();
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRequest {
    pub params: ModelParams,
    pub times: Vec<u64>,
    pub max_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsAt {
    pub n: u64,
    pub mean_n: f64,
    /// `E[N_n^k]` for k = 1..=max_order
    pub raw_moments: Vec<f64>,
    pub mean_vector: (f64, f64),
    pub second_matrix: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMoments {
    pub params: ModelParams,
    pub max_order: usize,
    pub times: Vec<MomentsAt>,
}

/// Evaluates every requested time in one recursion pass.
pub fn exact_moments(req: &MomentRequest) -> Result<ExactMoments> {
    check_order(req.max_order)?;
    let p = &req.params;
    let mut times = req.times.clone();
    times.sort_unstable();
    times.dedup();
    let binom = binomials(req.max_order);
    let n0 = p.n0 as f64;
    let mut m: Vec<f64> = (1..=req.max_order).map(|r| n0.powi(r as i32)).collect();
    let mut step = 0u64;
    let mut out = Vec::with_capacity(times.len());
    for &n in &times {
        while step < n {
            recursion_step(&mut m, &binom, p.a, p.theta, p.total_at(step) as f64);
            step += 1;
        }
        out.push(MomentsAt {
            n,
            mean_n: mean_n(p, n),
            raw_moments: m.clone(),
            mean_vector: mean_vector(p, n),
            second_matrix: second_matrix(p, n),
        });
    }
    Ok(ExactMoments {
        params: *p,
        max_order: req.max_order,
        times: out,
    })
}

impl ExactMoments {
    /// CSV `n,k,value` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,k,value")?;
        for t in &self.times {
            for (i, v) in t.raw_moments.iter().enumerate() {
                writeln!(w, "{},{},{:.16e}", t.n, i + 1, v)?;
            }
        }
        Ok(())
    }
}
