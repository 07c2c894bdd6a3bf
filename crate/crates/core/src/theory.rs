//! Limit constants for the three regimes.
//!
//! Everything here is a closed-form number. Bivariate statements are reduced to
//! the `N` coordinate: the fluctuation vector is `(N^, -N^)`, so every
//! covariance matrix is a scalar times `[[1, -1], [-1, 1]]`.

use serde::Serialize;

use crate::error::{OdlError, Result};
use crate::params::{ModelParams, Regime};
use crate::special::ln_gamma_ratio;

pub fn classify_regime(p: &ModelParams) -> Regime {
    Regime::classify(p.theta)
}

fn mismatch(what: &str, p: &ModelParams) -> OdlError {
    OdlError::RegimeMismatch(format!("{what} is not defined for the {} regime (theta={})", p.regime, p.theta))
}

/// `(a/(1-theta), 1 - a/(1-theta))`.
pub fn limit_proportions(p: &ModelParams) -> Result<(f64, f64)> {
    if !(p.theta < 1.0) {
        return Err(OdlError::Domain("limit proportions need theta < 1".into()));
    }
    let x = p.limit_share();
    Ok((x, 1.0 - x))
}

/// `sigma^2 = a(1-a-theta) / ((1-theta)^2 (1-2 theta))`.
pub fn sigma2(p: &ModelParams) -> Result<f64> {
    if p.regime != Regime::Subcritical {
        return Err(mismatch("sigma^2", p));
    }
    let th = p.theta;
    Ok(p.a * (1.0 - p.a - th) / ((1.0 - th).powi(2) * (1.0 - 2.0 * th)))
}

/// `2a(1-2a)`, the critical fluctuation variance.
pub fn critical_variance(p: &ModelParams) -> Result<f64> {
    if p.regime != Regime::Critical {
        return Err(mismatch("the critical variance", p));
    }
    Ok(2.0 * p.a * (1.0 - 2.0 * p.a))
}

/// `a(1-a-theta) / ((1-theta)^2 (2 theta - 1))`, variance of the supercritical residual.
pub fn residual_variance(p: &ModelParams) -> Result<f64> {
    if p.regime != Regime::Supercritical || !(p.theta < 1.0) {
        return Err(mismatch("the residual variance", p));
    }
    let th = p.theta;
    Ok(p.a * (1.0 - p.a - th) / ((1.0 - th).powi(2) * (2.0 * th - 1.0)))
}

/// `(E[W], E[W^2])` for the a.s. limit `W` of `n^(1-theta) N^_n`.
///
/// With `u = 2 theta + T0` and `c = N0 - a T0 / (1-theta)`:
///
/// ```text
/// E[W]   = G(T0)/G(theta+T0) * c
/// E[W^2] = G(T0)/G(u) * ( N0^2
///            + a T0/(1-theta) * ((1-2a)/(2 theta-1) - a (T0+1)/(1-theta))
///            + c ((1-2a) - 2a (theta+T0)/(1-theta)) )
/// ```
pub fn w_moments(p: &ModelParams) -> Result<(f64, f64)> {
    if p.regime != Regime::Supercritical || !(p.theta < 1.0) {
        return Err(mismatch("W", p));
    }
    let (a, th) = (p.a, p.theta);
    let t0 = p.t0_f();
    let n0 = p.n0 as f64;
    let c = n0 - a * t0 / (1.0 - th);
    let mean = ln_gamma_ratio(t0, th + t0).exp() * c;
    let bracket = n0 * n0
        + a * t0 / (1.0 - th) * ((1.0 - 2.0 * a) / (2.0 * th - 1.0) - a * (t0 + 1.0) / (1.0 - th))
        + c * ((1.0 - 2.0 * a) - 2.0 * a * (th + t0) / (1.0 - th));
    let second = ln_gamma_ratio(t0, 2.0 * th + t0).exp() * bracket;
    Ok((mean, second))
}

/// Normalisation applied to `N^_n` (or to the residual `n^(1-theta) N^_n - W`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FluctScaling {
    /// `sqrt(n) N^_n`
    Sqrt,
    /// `sqrt(n / log n) N^_n`
    SqrtOverLog,
    /// `sqrt(n^(2 theta - 1)) (n^(1-theta) N^_n - W)`
    Residual { exponent: f64 },
}

impl FluctScaling {
    pub fn factor(&self, n: f64) -> f64 {
        match *self {
            FluctScaling::Sqrt => n.sqrt(),
            FluctScaling::SqrtOverLog => (n / n.ln()).sqrt(),
            FluctScaling::Residual { exponent } => n.powf(0.5 * exponent),
        }
    }
}

/// Scaling and limiting covariance of the scaled fluctuation pair.
pub fn fluctuation_covariance(p: &ModelParams) -> Result<(FluctScaling, [[f64; 2]; 2])> {
    let (scaling, v) = match p.regime {
        Regime::Subcritical => (FluctScaling::Sqrt, sigma2(p)?),
        Regime::Critical => (FluctScaling::SqrtOverLog, critical_variance(p)?),
        Regime::Supercritical => (
            FluctScaling::Residual {
                exponent: 2.0 * p.theta - 1.0,
            },
            residual_variance(p)?,
        ),
    };
    Ok((scaling, [[v, -v], [-v, v]]))
}

/// The constant multiplying the LIL envelope in each regime.
pub fn lil_constant(p: &ModelParams) -> Result<f64> {
    Ok(match p.regime {
        Regime::Subcritical => sigma2(p)?.sqrt(),
        Regime::Critical => critical_variance(p)?.sqrt(),
        Regime::Supercritical => residual_variance(p)?.sqrt(),
    })
}

/// Smallest `n` at which the envelope is defined.
pub fn lil_min_n(regime: Regime) -> u64 {
    match regime {
        // log log log n > 0 needs n > e^e
        Regime::Critical => 16,
        _ => 3,
    }
}

/// LIL envelope for `|N^_n|` (sub/critical) or for the residual
/// `|n^(1-theta) N^_n - W|` (supercritical).
pub fn lil_envelope(p: &ModelParams, n: u64) -> Result<f64> {
    if n < lil_min_n(p.regime) {
        return Err(OdlError::Domain(format!(
            "LIL envelope needs n >= {} in the {} regime",
            lil_min_n(p.regime),
            p.regime
        )));
    }
    let c = lil_constant(p)?;
    let nf = n as f64;
    let ll = nf.ln().ln();
    Ok(match p.regime {
        Regime::Subcritical => c * (2.0 * ll / nf).sqrt(),
        Regime::Critical => c * (2.0 * nf.ln() * ll.ln() / nf).sqrt(),
        Regime::Supercritical => c * (2.0 * ll / nf.powf(2.0 * p.theta - 1.0)).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CnLimits {
    /// a.s. limit of `C_n / n`
    pub as_limit: f64,
    /// CLT variance (sub/critical) or the multiplier of `W` (supercritical)
    pub second: f64,
}

pub fn cn_limits(p: &ModelParams) -> Result<CnLimits> {
    let as_limit = p.limit_share() - 0.5;
    let second = match p.regime {
        Regime::Subcritical => 8.0 * sigma2(p)? / (3.0 * (2.0 - p.theta)),
        Regime::Critical => 32.0 * p.a * (1.0 - 2.0 * p.a) / 9.0,
        Regime::Supercritical => 2.0 / (1.0 + p.theta),
    };
    Ok(CnLimits { as_limit, second })
}

/// `s (t/s)^theta sigma^2`, the (1,1) entry of the limiting covariance
/// of `sqrt(n) N^` at times `sn` and `tn`.
pub fn wst_covariance(p: &ModelParams, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) || s > t {
        return Err(OdlError::Domain(format!("need 0 < s <= t, got s={s}, t={t}")));
    }
    Ok(s * (t / s).powf(p.theta) * sigma2(p)?)
}

fn double_factorial_ratio(m: u32) -> f64 {
    // (2m)! / (2^m m!) = (2m-1)!!
    (1..=m).map(|i| (2 * i - 1) as f64).product()
}

/// Limit of the pathwise even-moment average of order `m`.
pub fn even_moment_limit(p: &ModelParams, m: u32) -> Result<f64> {
    let v = match p.regime {
        Regime::Subcritical => sigma2(p)?,
        Regime::Critical => critical_variance(p)?,
        Regime::Supercritical => return Err(mismatch("the moment average", p)),
    };
    Ok(v.powi(m as i32) * double_factorial_ratio(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheorySummary {
    pub params: ModelParams,
    pub regime: Regime,
    pub limit_props: (f64, f64),
    pub sigma2: Option<f64>,
    pub crit_var: Option<f64>,
    #[serde(rename = "W_mean")]
    pub w_mean: Option<f64>,
    #[serde(rename = "W_second")]
    pub w_second: Option<f64>,
    pub fluct_var: Option<f64>,
    pub lil_const: f64,
    pub cn_limit: f64,
    pub cn_clt_var: Option<f64>,
    #[serde(rename = "cn_W_scale")]
    pub cn_w_scale: Option<f64>,
}

pub fn theory_summary(p: &ModelParams) -> Result<TheorySummary> {
    if !(p.theta < 1.0) {
        return Err(OdlError::Domain("limit theory needs theta < 1".into()));
    }
    let cn = cn_limits(p)?;
    let mut s = TheorySummary {
        params: *p,
        regime: p.regime,
        limit_props: limit_proportions(p)?,
        sigma2: None,
        crit_var: None,
        w_mean: None,
        w_second: None,
        fluct_var: None,
        lil_const: lil_constant(p)?,
        cn_limit: cn.as_limit,
        cn_clt_var: None,
        cn_w_scale: None,
    };
    match p.regime {
        Regime::Subcritical => {
            s.sigma2 = Some(sigma2(p)?);
            s.cn_clt_var = Some(cn.second);
        }
        Regime::Critical => {
            s.crit_var = Some(critical_variance(p)?);
            s.cn_clt_var = Some(cn.second);
        }
        Regime::Supercritical => {
            let (m1, m2) = w_moments(p)?;
            s.w_mean = Some(m1);
            s.w_second = Some(m2);
            s.fluct_var = Some(residual_variance(p)?);
            s.cn_w_scale = Some(cn.second);
        }
    }
    Ok(s)
}
