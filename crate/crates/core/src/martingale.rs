//! Martingale scaffolding for the count process.
//!
//! With weights `a_n = (T0)_n / (theta + T0)_n` and `A_n = sum_{j<=n} a_j`,
//! `Z_n = a_n N_n - a A_n` is a martingale with `Z_0 = N0` and increments
//! `a_n xi_n`, where `xi_n = X_n - (a + theta N_{n-1} / T_{n-1})`.
//! Its quadratic-variation scale is `v_n = sum_{j=1}^n a_j^2`.

use std::io::Write;

use serde::Serialize;

use crate::error::{OdlError, Result};
use crate::model::Trajectory;
use crate::params::{ModelParams, Regime};
use crate::special::{digamma, ln_gamma, ln_gamma_ratio, ln_gamma_shift, pochhammer_ratio};

/// Terms cap for the hypergeometric series evaluator.
pub const SERIES_CAP: u64 = 100_000_000;
const PANEL_CAP: usize = 100_000;

/// `a_{n,k} = (T0)_n / (k theta + T0)_n`.
pub fn weight_a(p: &ModelParams, n: u64, k: u32) -> Result<f64> {
    let t0 = p.t0_f();
    let shifted = k as f64 * p.theta + t0;
    if !(shifted > 0.0) {
        return Err(OdlError::Domain(format!(
            "k*theta + T0 = {shifted} must be positive"
        )));
    }
    Ok(pochhammer_ratio(t0, shifted, n))
}

/// `a_{n,1}` for `n = 0..=horizon`, by the product `a_{j+1} = a_j T_j / (T_j + theta)`.
pub fn weight_sequence(p: &ModelParams, horizon: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon as usize + 1);
    let mut w = 1.0;
    out.push(w);
    for j in 0..horizon {
        let t = p.total_at(j) as f64;
        w *= t / (t + p.theta);
        out.push(w);
    }
    out
}

/// `A_n = (a_n T_n - T0) / (1 - theta)`; the direct sum is used at `theta = 1`.
pub fn cumulative_a(p: &ModelParams, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if (1.0 - p.theta).abs() < 1e-9 {
        return weight_sequence(p, n)[1..].iter().sum();
    }
    let an = pochhammer_ratio(p.t0_f(), p.theta + p.t0_f(), n);
    (an * p.total_at(n) as f64 - p.t0_f()) / (1.0 - p.theta)
}

/// `v_n = sum_{j=1}^n a_j^2`.
pub fn quad_variation(p: &ModelParams, n: u64) -> f64 {
    let mut w = 1.0f64;
    let mut acc = Neumaier::default();
    for j in 0..n {
        let t = p.total_at(j) as f64;
        w *= t / (t + p.theta);
        acc.add(w * w);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scaling {
    /// `n^exponent`
    Power { exponent: f64 },
    /// `log n`
    Log,
    /// bounded, `v_n` converges
    Constant,
}

impl Scaling {
    pub fn at(&self, n: f64) -> f64 {
        match *self {
            Scaling::Power { exponent } => n.powf(exponent),
            Scaling::Log => n.ln(),
            Scaling::Constant => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VLimit {
    pub scaling: Scaling,
    /// `lim v_n / scaling(n)`
    pub constant: f64,
}

/// Regime limit of `v_n`. In the supercritical case the constant is
/// `lim v_n = 3F2 - 1`, since the series counts the `j = 0` term `a_0^2 = 1`
/// and `v_n` starts at `j = 1`.
pub fn v_limit(p: &ModelParams) -> Result<VLimit> {
    let t0 = p.t0_f();
    Ok(match p.regime {
        Regime::Subcritical => {
            let g = ln_gamma_ratio(p.theta + t0, t0).exp();
            VLimit {
                scaling: Scaling::Power {
                    exponent: 1.0 - 2.0 * p.theta,
                },
                constant: g * g / (1.0 - 2.0 * p.theta),
            }
        }
        Regime::Critical => {
            let g = ln_gamma_ratio(t0 + 0.5, t0).exp();
            VLimit {
                scaling: Scaling::Log,
                constant: g * g,
            }
        }
        Regime::Supercritical => VLimit {
            scaling: Scaling::Constant,
            constant: hypergeom_3f2(p, 1e-12)? - 1.0,
        },
    })
}

/// Compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    /// certified bound on `|value - exact|`
    pub error_bound: f64,
    /// number of explicitly summed terms
    pub terms: u64,
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    let n = order as f64;
    for i in 1..=order {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// `sum_{j>=0} ((T0)_j / (theta + T0)_j)^2` for real `t0 > 0`, `theta > 1/2`.
///
/// The first `N` terms are summed explicitly. The tail is replaced by
/// `int_N^inf f + f(N)/2`, with the integral taken by Gauss-Legendre after the
/// substitution `x = N s^(-1/(2 theta - 1))`, which maps the `x^(-2 theta)`
/// decay to a bounded integrand on `(0, 1]`. For a convex decreasing `f` with
/// `f'' <= |f'| / 2` the trapezoid remainder is at most `|f'(N)| / 8`;
/// `N` is doubled until that bound and the quadrature discrepancy are below `tol`.
pub fn hypergeom_series(t0: f64, theta: f64, tol: f64) -> Result<SeriesValue> {
    if !(theta > 0.5) || !(t0 > 0.0) {
        return Err(OdlError::Domain(format!(
            "series needs theta > 1/2 and T0 > 0 (theta={theta}, T0={t0})"
        )));
    }
    let ln_c = ln_gamma(theta + t0) - ln_gamma(t0);
    // f(x) = (G(x+T0) G(theta+T0) / (G(x+theta+T0) G(T0)))^2 on real x >= 0
    let f = |x: f64| (2.0 * (ln_c - ln_gamma_shift(x + t0, theta))).exp();
    let decay = 2.0 * theta - 1.0;
    let rules = [gauss_legendre(12), gauss_legendre(24)];

    // integral of f over [x0, inf) after x = x0 e^t, on unit panels in t;
    let tail_integral = |x0: f64| -> Option<(f64, f64)> {
        let g = |t: f64| {
            let x = x0 * t.exp();
            f(x) * x
        };
        let (mut lo, mut hi) = (Neumaier::default(), Neumaier::default());
        let mut t = 0.0;
        for _ in 0..PANEL_CAP {
            for (acc, rule) in [(&mut lo, &rules[0]), (&mut hi, &rules[1])] {
                for &(s, w) in rule.iter() {
                    acc.add(w * g(t + s));
                }
            }
            t += 1.0;
            let x = x0 * t.exp();
            // f(x) = K (x + s)^(-2 theta) (1 + O(x^-2)) with s = T0 + theta/2 - 1/2
            let rest = f(x) * (x + t0 + 0.5 * theta - 0.5) / decay;
            let closure_err = rest * ((t0 + 1.0).powi(2) + 1.0) / (x * x);
            if closure_err < tol * 1e-2 {
                hi.add(rest);
                lo.add(rest);
                return Some((hi.value(), (hi.value() - lo.value()).abs() + closure_err));
            }
        }
        None
    };

    let mut head = Neumaier::default();
    let mut term = 1.0f64; // a_j, j = 0
    let mut summed = 0u64;
    let mut big_n = 1024u64;
    loop {
        while summed < big_n {
            head.add(term * term);
            let t = t0 + summed as f64;
            term *= t / (t + theta);
            summed += 1;
        }
        let nf = big_n as f64;
        let fn_ = f(nf);
        let dfn = 2.0 * fn_ * (digamma(nf + t0) - digamma(nf + t0 + theta));
        // size of the next Euler-Maclaurin term from the third derivative
        let y = nf + t0;
        let em = 2.0 * theta * (2.0 * theta + 1.0) * (2.0 * theta + 2.0) * fn_ / (y * y * y) / 720.0;
        if let Some((integral, quad_err)) = tail_integral(nf) {
            let bound = 2.0 * em + quad_err;
            if bound <= tol {
                let mut total = head;
                total.add(integral);
                total.add(0.5 * fn_);
                total.add(-dfn / 12.0);
                return Ok(SeriesValue {
                    value: total.value(),
                    error_bound: bound,
                    terms: summed,
                });
            }
        }
        if big_n >= SERIES_CAP {
            return Err(OdlError::ToleranceUnreachable {
                tol,
                cap: SERIES_CAP,
            });
        }
        big_n = (big_n * 2).min(SERIES_CAP);
    }
}

/// The limit series for a supercritical parameter set.
pub fn hypergeom_3f2(p: &ModelParams, tol: f64) -> Result<f64> {
    if p.regime != Regime::Supercritical {
        return Err(OdlError::RegimeMismatch(format!(
            "the v_n series converges only for theta > 1/2 (theta={})",
            p.theta
        )));
    }
    Ok(hypergeom_series(p.t0_f(), p.theta, tol)?.value)
}

/// `E[xi^2 | F] = p (1 - p)`.
pub fn xi_second_moment(p: f64) -> f64 {
    p - p * p
}

/// `E[xi^4 | F] = p - 4p^2 + 6p^3 - 3p^4`.
pub fn xi_fourth_moment(p: f64) -> f64 {
    p - 4.0 * p * p + 6.0 * p.powi(3) - 3.0 * p.powi(4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleDiagnostics {
    pub steps: Vec<u64>,
    pub z_path: Vec<f64>,
    /// `xi_n` for every step; empty on strided trajectories
    pub xi_path: Vec<f64>,
    pub v_seq: Vec<f64>,
    /// `f_n = (v_n - v_{n-1}) / v_n`; NaN at `n = 0`
    pub explosion: Vec<f64>,
    /// `<Z>_n`; empty on strided trajectories
    pub predictable_qv: Vec<f64>,
    /// `r_n^2 = p*(1-p*) (v_inf - v_{n-1})`; supercritical only
    pub tail_var: Vec<f64>,
}

/// Full diagnostics; requires a stride-1 trajectory.
pub fn martingale_path(traj: &Trajectory, p: &ModelParams) -> Result<MartingaleDiagnostics> {
    if !traj.is_contiguous() {
        return Err(OdlError::StrideIncompatible(
            "xi_n needs consecutive states; use martingale_path_strided".into(),
        ));
    }
    diagnostics(traj, p, true)
}

/// `Z_n`, `v_n`, `f_n` (and `r_n^2`) at the recorded steps only.
pub fn martingale_path_strided(traj: &Trajectory, p: &ModelParams) -> Result<MartingaleDiagnostics> {
    diagnostics(traj, p, false)
}

fn diagnostics(traj: &Trajectory, p: &ModelParams, dense: bool) -> Result<MartingaleDiagnostics> {
    if !traj.params.same_law(p) {
        return Err(OdlError::ParamsMismatch);
    }
    let v_inf = match p.regime {
        Regime::Supercritical => Some(v_limit(p)?.constant),
        _ => None,
    };
    let q = p.limit_bernoulli_var();
    let len = traj.samples.len();
    let mut out = MartingaleDiagnostics {
        steps: Vec::with_capacity(len),
        z_path: Vec::with_capacity(len),
        xi_path: Vec::new(),
        v_seq: Vec::with_capacity(len),
        explosion: Vec::with_capacity(len),
        predictable_qv: Vec::new(),
        tail_var: Vec::new(),
    };

    let (mut w, mut big_a, mut v, mut qv) = (1.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut v_prev = 0.0;
    let mut step = 0u64;
    let mut prev_count = p.n0;
    for s in &traj.samples {
        // advance the deterministic sequences to this sample
        while step < s.step {
            let t = p.total_at(step) as f64;
            let prob = p.a + p.theta * prev_count as f64 / t;
            w *= t / (t + p.theta);
            big_a += w;
            v_prev = v;
            v += w * w;
            if dense {
                qv += w * w * xi_second_moment(prob);
            }
            step += 1;
        }
        if dense && s.step > 0 {
            let t = p.total_at(s.step - 1) as f64;
            let prob = p.a + p.theta * prev_count as f64 / t;
            let x = s.decision.unwrap_or(0) as f64;
            out.xi_path.push(x - prob);
        }
        out.steps.push(s.step);
        out.z_path.push(w * s.count_a as f64 - p.a * big_a);
        out.v_seq.push(v);
        out.explosion.push(if s.step == 0 { f64::NAN } else { (v - v_prev) / v });
        if dense {
            out.predictable_qv.push(qv);
        }
        if let Some(v_inf) = v_inf {
            out.tail_var.push(q * (v_inf - v_prev).max(0.0));
        }
        prev_count = s.count_a;
    }
    Ok(out)
}

impl MartingaleDiagnostics {
    /// CSV `n,z,v,f,qv`; `qv` is blank when it was not computed.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,z,v,f,qv")?;
        for i in 0..self.steps.len() {
            let f = self.explosion[i];
            let f = if f.is_nan() { String::new() } else { format!("{f:.16e}") };
            let qv = self
                .predictable_qv
                .get(i)
                .map(|x| format!("{x:.16e}"))
                .unwrap_or_default();
            writeln!(
                w,
                "{},{:.16e},{:.16e},{},{}",
                self.steps[i], self.z_path[i], self.v_seq[i], f, qv
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_trajectory, Mode, StrideSpec};

    fn reference() -> ModelParams {
        ModelParams::with_theta(0.3, 0.2, 1, 1).unwrap()
    }

    #[test]
    fn weight_examples() {
        let p = reference();
        assert_eq!(weight_a(&p, 0, 3).unwrap(), 1.0);
        assert!((weight_a(&p, 1, 1).unwrap() - 2.0 / 2.2).abs() < 1e-15);
        let big = weight_a(&p, 10_000, 1).unwrap();
        let asym = ln_gamma_ratio(2.2, 2.0).exp() * 10_000f64.powf(-0.2);
        assert!(((big - asym) / asym).abs() < 1e-3);
    }

    #[test]
    fn compensator_closed_form() {
        let p = reference();
        assert_eq!(cumulative_a(&p, 0), 0.0);
        assert!((cumulative_a(&p, 1) - 2.0 / 2.2).abs() < 1e-14);
        for &(a, th) in &[(0.3, 0.2), (0.2, 0.6), (0.25, -0.2), (0.1, 0.5)] {
            let q = ModelParams::with_theta(a, th, 2, 3).unwrap();
            let direct: f64 = weight_sequence(&q, 100)[1..].iter().sum();
            assert!(((cumulative_a(&q, 100) - direct) / direct).abs() < 1e-11);
        }
    }

    #[test]
    fn first_quad_variation() {
        assert!((quad_variation(&reference(), 1) - (2.0f64 / 2.2).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn critical_constant_unit_start() {
        let g = ln_gamma_ratio(1.5, 1.0).exp();
        assert!((g * g - std::f64::consts::PI / 4.0).abs() < 1e-14);
    }

    #[test]
    fn basel_sum() {
        let s = hypergeom_series(1.0, 1.0, 1e-12).unwrap();
        let exact = std::f64::consts::PI.powi(2) / 6.0;
        assert!((s.value - exact).abs() < 1e-11, "{}", s.value - exact);
    }

    #[test]
    fn series_self_consistent() {
        let coarse = hypergeom_series(1.0, 0.75, 1e-6).unwrap();
        let fine = hypergeom_series(1.0, 0.75, 1e-10).unwrap();
        assert!((coarse.value - fine.value).abs() <= coarse.error_bound + fine.error_bound);
    }

    #[test]
    fn series_decreases_in_theta() {
        let vals: Vec<f64> = [0.6, 0.7, 0.8, 0.9]
            .iter()
            .map(|&th| hypergeom_series(2.0, th, 1e-10).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn series_rejects_subcritical() {
        assert!(hypergeom_3f2(&reference(), 1e-8).is_err());
    }

    #[test]
    fn xi_polynomial_bounds() {
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            assert!(xi_second_moment(p) <= 0.25 + 1e-16);
            assert!(xi_fourth_moment(p) <= 1.0 / 12.0 + 1e-16);
        }
        // maximum at p (1 - p) = 1/6
        let p_star = 0.5 * (1.0 - 1.0 / 3f64.sqrt());
        assert!((xi_fourth_moment(p_star) - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn z_after_one_a_decision() {
        let p = reference();
        let mut t = simulate_trajectory(&p, 1, 0, Mode::Marginal, StrideSpec::dense());
        t.samples[1].count_a = 2;
        t.samples[1].count_b = 1;
        t.samples[1].decision = Some(1);
        let d = martingale_path(&t, &p).unwrap();
        assert_eq!(d.z_path[0], 1.0);
        assert!((d.z_path[1] - (2.0 / 2.2 * 2.0 - 0.3 * 2.0 / 2.2)).abs() < 1e-14);
        assert!((d.xi_path[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn z_is_sum_of_weighted_innovations() {
        let p = ModelParams::with_theta(0.2, 0.6, 2, 1).unwrap();
        let t = simulate_trajectory(&p, 500, 3, Mode::Latent, StrideSpec::dense());
        let d = martingale_path(&t, &p).unwrap();
        let w = weight_sequence(&p, 500);
        let mut z = p.n0 as f64;
        for n in 1..=500usize {
            z += w[n] * d.xi_path[n - 1];
            assert!((z - d.z_path[n]).abs() < 1e-9);
        }
        assert!(d.v_seq.windows(2).skip(1).all(|x| x[1] > x[0]));
        assert!(d.explosion[1..].iter().all(|&f| f > 0.0 && f <= 1.0));
        assert!(d.tail_var.windows(2).all(|x| x[1] <= x[0]));
    }

    #[test]
    fn strided_rejected_by_dense_path() {
        let p = reference();
        let t = simulate_trajectory(&p, 1000, 3, Mode::Marginal, StrideSpec::default());
        assert!(matches!(
            martingale_path(&t, &p),
            Err(OdlError::StrideIncompatible(_))
        ));
        let dense = simulate_trajectory(&p, 1000, 3, Mode::Marginal, StrideSpec::dense());
        let full = martingale_path(&dense, &p).unwrap();
        let sparse = martingale_path_strided(&t, &p).unwrap();
        for (i, &s) in sparse.steps.iter().enumerate() {
            assert!((sparse.z_path[i] - full.z_path[s as usize]).abs() < 1e-12);
            assert!((sparse.v_seq[i] - full.v_seq[s as usize]).abs() < 1e-12);
        }
    }
}
