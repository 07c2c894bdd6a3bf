//! Exact law of `N_n` by forward dynamic programming over the count chain.
//!
//! `N_n` moves from `N` to `N + 1` with probability `a + theta * N / T_n`,
//! so the distribution at step `n` lives on `N0..=N0+n` and one sweep per
//! step costs `O(n)`. A brute-force enumerator over all `2^n` decision
//! sequences is kept for validating the DP on small horizons.

use std::io::Write;

use serde::Serialize;

use crate::error::{OdlError, Result};
use crate::model::step_probability;
use crate::params::ModelParams;

pub const ORACLE_CAP: u64 = 5000;
pub const ENUMERATION_CAP: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactDistribution {
    pub n: u64,
    pub n0: u64,
    /// `probabilities[k] = P(N_n = n0 + k)`
    pub probabilities: Vec<f64>,
}

impl ExactDistribution {
    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.probabilities.len() as u64).map(move |k| self.n0 + k)
    }

    pub fn total_mass(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// `E[N_n^k]`
    pub fn raw_moment(&self, k: u32) -> f64 {
        self.support()
            .zip(&self.probabilities)
            .map(|(x, p)| p * (x as f64).powi(k as i32))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support()
            .zip(&self.probabilities)
            .map(|(x, p)| p * (x as f64 - m).powi(2))
            .sum()
    }

    /// CSV `k,probability`, `k` the offset from `n0`, probabilities at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k,probability")?;
        for (k, p) in self.probabilities.iter().enumerate() {
            writeln!(w, "{k},{p:.16e}")?;
        }
        Ok(())
    }
}

pub fn exact_distribution(params: &ModelParams, n: u64) -> Result<ExactDistribution> {
    if n > ORACLE_CAP {
        return Err(OdlError::OracleCapExceeded { n, cap: ORACLE_CAP });
    }
    let mut probs = vec![0.0f64; n as usize + 1];
    probs[0] = 1.0;
    for j in 0..n {
        let t = params.total_at(j);
        // walk down so that probs[k] is still the step-j value when it is read
        for k in (0..=j as usize).rev() {
            let mass = probs[k];
            if mass == 0.0 {
                continue;
            }
            let p = step_probability(params, params.n0 + k as u64, t);
            probs[k + 1] += p * mass;
            probs[k] = (1.0 - p) * mass;
        }
    }
    Ok(ExactDistribution {
        n,
        n0: params.n0,
        probabilities: probs,
    })
}

/// Sums the probability of every one of the `2^n` decision sequences.
pub fn enumerate_distribution(params: &ModelParams, n: u64) -> Result<ExactDistribution> {
    if n > ENUMERATION_CAP {
        return Err(OdlError::OracleCapExceeded {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    let mut probs = vec![0.0f64; n as usize + 1];
    for mask in 0u64..(1u64 << n) {
        let mut count = params.n0;
        let mut weight = 1.0;
        for j in 0..n {
            let p = step_probability(params, count, params.total_at(j));
            if mask >> j & 1 == 1 {
                weight *= p;
                count += 1;
            } else {
                weight *= 1.0 - p;
            }
        }
        probs[(count - params.n0) as usize] += weight;
    }
    Ok(ExactDistribution {
        n,
        n0: params.n0,
        probabilities: probs,
    })
}
