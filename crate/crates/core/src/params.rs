//! Validated model parameters.
//!
//! The decision process is driven by six numbers: the own-preference weight
//! `a`, the social-influence weight `b`, the trend-follower and against-trend
//! probabilities `alpha` and `beta`, and the initial adopter counts `n0`, `m0`.
//! After marginalising the latent trend label, the chain only depends on
//! `a`, `theta = b * (alpha - beta)` and `(n0, m0)`.

use serde::{Deserialize, Serialize};

use crate::error::{OdlError, Result};

/// Slack used when checking the closed inequalities of the parameter domain.
const DOMAIN_EPS: f64 = 1e-12;

/// `|theta - 1/2|` below this is treated as the critical point.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Parameters within this distance of `theta = 1/2` get a report warning.
pub const NEAR_CRITICAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl Regime {
    pub fn classify(theta: f64) -> Regime {
        if (theta - 0.5).abs() < CRITICAL_TOL {
            Regime::Critical
        } else if theta < 0.5 {
            Regime::Subcritical
        } else {
            Regime::Supercritical
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The six raw model numbers, before validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n0: f64,
    pub m0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n0: u64,
    pub m0: u64,
    pub theta: f64,
    pub t0: u64,
    pub regime: Regime,
}

fn violation(msg: impl Into<String>) -> OdlError {
    OdlError::ConstraintViolation(msg.into())
}

/// Checks every admissibility condition and derives `theta`, `t0` and the regime.
pub fn validate_params(raw: RawParams) -> Result<ModelParams> {
    let fields = [
        ("a", raw.a),
        ("b", raw.b),
        ("alpha", raw.alpha),
        ("beta", raw.beta),
        ("n0", raw.n0),
        ("m0", raw.m0),
    ];
    for (field, v) in fields {
        if !v.is_finite() {
            return Err(OdlError::NonFinite { field });
        }
    }
    let RawParams {
        a,
        b,
        alpha,
        beta,
        n0,
        m0,
    } = raw;

    if a < 0.0 {
        return Err(violation("0 <= a"));
    }
    if b < 0.0 {
        return Err(violation("0 <= b"));
    }
    if a + b > 1.0 + DOMAIN_EPS {
        return Err(violation("a + b <= 1"));
    }
    if alpha < 0.0 {
        return Err(violation("0 <= alpha"));
    }
    if beta < 0.0 {
        return Err(violation("0 <= beta"));
    }
    if alpha + beta > 1.0 + DOMAIN_EPS {
        return Err(violation("alpha + beta <= 1"));
    }
    if beta != 0.0 && b > a + DOMAIN_EPS {
        return Err(violation("b <= a whenever beta != 0"));
    }
    for (name, v) in [("n0", n0), ("m0", m0)] {
        if v < 1.0 || v.fract() != 0.0 || v > 1e15 {
            return Err(violation(format!("{name} must be a positive integer")));
        }
    }

    let theta = b * (alpha - beta);
    // the marginal step probability is affine in x, so the endpoints decide
    let (lo, hi) = (a.min(a + theta), a.max(a + theta));
    if lo < -DOMAIN_EPS || hi > 1.0 + DOMAIN_EPS {
        return Err(OdlError::ProbabilityEscape { a, theta });
    }

    let n0 = n0 as u64;
    let m0 = m0 as u64;
    Ok(ModelParams {
        a,
        b,
        alpha,
        beta,
        n0,
        m0,
        theta,
        t0: n0 + m0,
        regime: Regime::classify(theta),
    })
}

impl ModelParams {
    pub fn new(a: f64, b: f64, alpha: f64, beta: f64, n0: u64, m0: u64) -> Result<Self> {
        validate_params(RawParams {
            a,
            b,
            alpha,
            beta,
            n0: n0 as f64,
            m0: m0 as f64,
        })
    }

    /// Builds parameters from the marginal pair `(a, theta)`, choosing a latent
    /// representation `(b, alpha, beta)` that satisfies the model constraints.
    pub fn with_theta(a: f64, theta: f64, n0: u64, m0: u64) -> Result<Self> {
        if !(a.is_finite() && theta.is_finite()) {
            return Err(OdlError::NonFinite { field: "theta" });
        }
        if theta == 0.0 {
            return Self::new(a, 0.0, 0.0, 0.0, n0, m0);
        }
        if theta > 0.0 {
            // beta = 0 lifts the b <= a requirement; take the largest admissible b
            let b = 1.0 - a;
            if b < theta - DOMAIN_EPS {
                return Err(OdlError::ProbabilityEscape { a, theta });
            }
            let alpha = (theta / b).min(1.0);
            let mut p = Self::new(a, b, alpha, 0.0, n0, m0)?;
            p.theta = theta;
            p.regime = Regime::classify(theta);
            Ok(p)
        } else {
            let b = a.min(1.0 - a);
            if b < -theta - DOMAIN_EPS || b <= 0.0 {
                return Err(violation(format!(
                    "theta={theta} has no latent representation with a={a}"
                )));
            }
            let beta = (-theta / b).min(1.0);
            let mut p = Self::new(a, b, 0.0, beta, n0, m0)?;
            p.theta = theta;
            p.regime = Regime::classify(theta);
            Ok(p)
        }
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            a: self.a,
            b: self.b,
            alpha: self.alpha,
            beta: self.beta,
            n0: self.n0 as f64,
            m0: self.m0 as f64,
        }
    }

    pub fn t0_f(&self) -> f64 {
        self.t0 as f64
    }

    /// `T_n = n + T_0`.
    pub fn total_at(&self, n: u64) -> u64 {
        n + self.t0
    }

    /// Limiting share of A-adopters, `a / (1 - theta)`. Undefined at `theta = 1`.
    pub fn limit_share(&self) -> f64 {
        self.a / (1.0 - self.theta)
    }

    /// Asymptotic conditional variance of one decision, `p*(1-p*)` with `p*` the limit share.
    pub fn limit_bernoulli_var(&self) -> f64 {
        let p = self.limit_share();
        p * (1.0 - p)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.a == 0.0 && self.theta == 0.0 {
            out.push("a = theta = 0: every decision is B (deterministic path)".to_string());
        }
        let d = (self.theta - 0.5).abs();
        if d >= CRITICAL_TOL && d < NEAR_CRITICAL_TOL {
            out.push(format!(
                "theta={} is within {NEAR_CRITICAL_TOL:e} of 1/2; finite-n statistics interpolate regimes",
                self.theta
            ));
        }
        out
    }

    /// Same marginal law (a, theta, n0, m0), ignoring the latent decomposition.
    pub fn same_law(&self, other: &ModelParams) -> bool {
        self.a == other.a && self.theta == other.theta && self.n0 == other.n0 && self.m0 == other.m0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_set_is_subcritical() {
        let p = ModelParams::new(0.5, 0.3, 0.6, 0.2, 1, 1).unwrap();
        assert!((p.theta - 0.12).abs() < 1e-15);
        assert_eq!(p.regime, Regime::Subcritical);
        assert_eq!(p.t0, 2);
    }

    #[test]
    fn beta_nonzero_requires_b_le_a() {
        let err = ModelParams::new(0.2, 0.3, 0.5, 0.1, 1, 1).unwrap_err();
        match err {
            OdlError::ConstraintViolation(m) => assert!(m.contains("b <= a")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_plus_beta_bounded() {
        let err = ModelParams::new(0.5, 0.3, 0.7, 0.5, 1, 1).unwrap_err();
        assert!(matches!(err, OdlError::ConstraintViolation(m) if m.contains("alpha + beta")));
    }

    #[test]
    fn initial_counts_positive() {
        assert!(ModelParams::new(0.5, 0.3, 0.6, 0.2, 0, 1).is_err());
        let raw = RawParams {
            a: 0.5,
            b: 0.3,
            alpha: 0.6,
            beta: 0.2,
            n0: 1.5,
            m0: 1.0,
        };
        assert!(validate_params(raw).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let raw = RawParams {
            a: f64::NAN,
            b: 0.3,
            alpha: 0.6,
            beta: 0.2,
            n0: 1.0,
            m0: 1.0,
        };
        assert_eq!(
            validate_params(raw).unwrap_err(),
            OdlError::NonFinite { field: "a" }
        );
    }

    #[test]
    fn zero_a_with_negative_theta_escapes() {
        let err = ModelParams::new(0.0, 0.0, 0.0, 0.5, 1, 1);
        // b = 0 gives theta = 0, so this one is fine
        assert!(err.is_ok());
        let err = ModelParams::with_theta(0.0, -0.1, 1, 1).unwrap_err();
        assert!(matches!(err, OdlError::ConstraintViolation(_) | OdlError::ProbabilityEscape { .. }));
    }

    #[test]
    fn degenerate_path_is_flagged() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 0.0, 1, 1).unwrap();
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn regimes() {
        assert_eq!(Regime::classify(0.12), Regime::Subcritical);
        assert_eq!(Regime::classify(0.5), Regime::Critical);
        assert_eq!(Regime::classify(0.6), Regime::Supercritical);
        // 0.8 * 0.625 is not exactly 1/2 in binary
        let p = ModelParams::new(0.1, 0.8, 0.625, 0.0, 1, 1).unwrap();
        assert_eq!(p.regime, Regime::Critical);
    }

    #[test]
    fn with_theta_round_trips() {
        for &(a, th) in &[(0.3, 0.2), (0.2, 0.6), (0.25, -0.2), (0.5, 0.0), (0.2, 0.8), (0.0, 1.0)] {
            let p = ModelParams::with_theta(a, th, 1, 1).unwrap();
            assert_eq!(p.theta, th);
            assert!((p.b * (p.alpha - p.beta) - th).abs() < 1e-12);
        }
    }
}
