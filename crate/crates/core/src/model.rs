//! Path simulation of the decision process.
//!
//! Two samplers share one law for `(N_n)`:
//!
//! * latent mode draws the trend label `Y_n` in {+1, -1, 0} and then the
//!   decision with probability `a + b * Y_n * N_n / T_n`;
//! * marginal mode draws the decision directly with probability
//!   `a + theta * N_n / T_n`.
//!
//! A decision is `1` iff `(U - a) * T_n < slope * N_n`, which is the event
//! `U < a + slope * N_n / T_n` without a division on the loop-carried path.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Latent,
    #[default]
    Marginal,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "latent" => Ok(Mode::Latent),
            "marginal" => Ok(Mode::Marginal),
            other => Err(format!("unknown mode `{other}` (latent|marginal)")),
        }
    }
}

/// `P(X_{n+1} = 1 | N_n = n_count, T_n = t_count)` after marginalising the trend label.
pub fn step_probability(params: &ModelParams, n_count: u64, t_count: u64) -> f64 {
    debug_assert!(t_count >= 1 && n_count <= t_count);
    let p = params.a + params.theta * (n_count as f64 / t_count as f64);
    p.clamp(0.0, 1.0)
}

#[inline(always)]
fn unit_f64(rng: &mut Pcg64Mcg) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Single-path stepping kernel. Holds the running state of one replication.
#[derive(Debug, Clone)]
pub struct Walker {
    a: f64,
    theta: f64,
    b: f64,
    alpha: f64,
    alpha_beta: f64,
    mode: Mode,
    step: u64,
    count_a: f64,
    total: f64,
    sum_count_a: f64,
    last_decision: Option<u8>,
    rng: Pcg64Mcg,
}

impl Walker {
    pub fn new(params: &ModelParams, mode: Mode, seed: u64) -> Self {
        Walker {
            a: params.a,
            theta: params.theta,
            b: params.b,
            alpha: params.alpha,
            alpha_beta: params.alpha + params.beta,
            mode,
            step: 0,
            count_a: params.n0 as f64,
            total: params.t0 as f64,
            sum_count_a: 0.0,
            last_decision: None,
            rng: Pcg64Mcg::seed_from_u64(seed),
        }
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn count_a(&self) -> u64 {
        self.count_a as u64
    }

    pub fn count_b(&self) -> u64 {
        (self.total - self.count_a) as u64
    }

    pub fn total(&self) -> u64 {
        self.total as u64
    }

    /// `sum_{j=1}^{n} N_j` at the current step `n`.
    pub fn sum_count_a(&self) -> f64 {
        self.sum_count_a
    }

    pub fn last_decision(&self) -> Option<u8> {
        self.last_decision
    }

    #[inline(always)]
    fn draw(&mut self) -> bool {
        match self.mode {
            Mode::Marginal => {
                let u = unit_f64(&mut self.rng);
                (u - self.a) * self.total < self.theta * self.count_a
            }
            Mode::Latent => {
                let v = unit_f64(&mut self.rng);
                let y = if v < self.alpha {
                    1.0
                } else if v < self.alpha_beta {
                    -1.0
                } else {
                    0.0
                };
                let u = unit_f64(&mut self.rng);
                (u - self.a) * self.total < self.b * y * self.count_a
            }
        }
    }

    /// One decision; returns `X_{n+1}`.
    #[inline]
    pub fn step(&mut self) -> u8 {
        let x = self.draw() as u8;
        self.count_a += x as f64;
        self.total += 1.0;
        self.step += 1;
        self.sum_count_a += self.count_a;
        self.last_decision = Some(x);
        x
    }

    /// Advances to step `target` (no-op if already there).
    pub fn advance_to(&mut self, target: u64) {
        if target <= self.step {
            return;
        }
        match self.mode {
            Mode::Marginal => {
                let (a, theta) = (self.a, self.theta);
                let mut count = self.count_a;
                let mut total = self.total;
                let mut sum = self.sum_count_a;
                let mut x = 0u8;
                for _ in self.step..target {
                    let u = unit_f64(&mut self.rng);
                    let hit = (u - a) * total < theta * count;
                    x = hit as u8;
                    count += x as f64;
                    total += 1.0;
                    sum += count;
                }
                self.count_a = count;
                self.total = total;
                self.sum_count_a = sum;
                self.last_decision = Some(x);
                self.step = target;
            }
            Mode::Latent => {
                while self.step < target {
                    self.step();
                }
            }
        }
    }

    /// Advances to `target`, calling `f(n, N_n, X_n)` after every step.
    pub fn advance_with(&mut self, target: u64, mut f: impl FnMut(u64, u64, u8)) {
        while self.step < target {
            let x = self.step();
            f(self.step, self.count_a as u64, x);
        }
    }
}

/// Which steps of a path are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrideSpec {
    /// every `k`-th step
    Every { k: u64 },
    /// steps `ceil(ratio^j)`, j = 0, 1, ...
    Geometric { ratio: f64 },
    /// an explicit list
    Steps { steps: Vec<u64> },
}

impl Default for StrideSpec {
    fn default() -> Self {
        StrideSpec::Geometric { ratio: 1.05 }
    }
}

impl StrideSpec {
    pub fn dense() -> Self {
        StrideSpec::Every { k: 1 }
    }

    /// Recorded steps for a path of the given horizon: sorted, unique, always
    /// containing `0` and `horizon`.
    pub fn steps(&self, horizon: u64) -> Vec<u64> {
        let mut out = vec![0u64];
        match self {
            StrideSpec::Every { k } => {
                let k = (*k).max(1);
                let mut s = k;
                while s <= horizon {
                    out.push(s);
                    s += k;
                }
            }
            StrideSpec::Geometric { ratio } => out.extend(geometric_steps(1, horizon, *ratio)),
            StrideSpec::Steps { steps } => {
                out.extend(steps.iter().copied().filter(|&s| s <= horizon))
            }
        }
        out.push(horizon);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn describe(&self) -> String {
        match self {
            StrideSpec::Every { k } => format!("every {k} steps"),
            StrideSpec::Geometric { ratio } => format!("geometric ceil({ratio}^j) plus final"),
            StrideSpec::Steps { steps } => format!("{} explicit steps", steps.len()),
        }
    }
}

/// `ceil(ratio^j)` for j >= 0, restricted to `[lo, hi]`, deduplicated.
pub fn geometric_steps(lo: u64, hi: u64, ratio: f64) -> Vec<u64> {
    assert!(ratio > 1.0, "geometric ratio must exceed 1");
    let mut out = Vec::new();
    let mut x = 1.0f64;
    loop {
        let s = x.ceil() as u64;
        if s > hi {
            break;
        }
        if s >= lo && out.last() != Some(&s) {
            out.push(s);
        }
        x *= ratio;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub step: u64,
    pub count_a: u64,
    pub count_b: u64,
    /// `None` for the initial record
    pub decision: Option<u8>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub seed: u64,
    pub mode: Mode,
    pub horizon: u64,
    pub stride_spec: StrideSpec,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    /// True when every step `0..=horizon` is recorded.
    pub fn is_contiguous(&self) -> bool {
        self.samples.len() as u64 == self.horizon + 1
            && self
                .samples
                .iter()
                .enumerate()
                .all(|(i, s)| s.step == i as u64)
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always has an initial record")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,count_a,count_b,decision")?;
        for s in &self.samples {
            match s.decision {
                Some(x) => writeln!(w, "{},{},{},{}", s.step, s.count_a, s.count_b, x)?,
                None => writeln!(w, "{},{},{},", s.step, s.count_a, s.count_b)?,
            }
        }
        Ok(())
    }
}

/// Simulates one path of `steps` decisions. Deterministic in `(params, steps, seed, mode)`.
pub fn simulate_trajectory(
    params: &ModelParams,
    steps: u64,
    seed: u64,
    mode: Mode,
    stride: StrideSpec,
) -> Trajectory {
    let record = stride.steps(steps);
    let mut walker = Walker::new(params, mode, seed);
    let mut samples = Vec::with_capacity(record.len());
    for &s in &record {
        walker.advance_to(s);
        samples.push(Sample {
            step: s,
            count_a: walker.count_a(),
            count_b: walker.count_b(),
            decision: walker.last_decision(),
        });
    }
    Trajectory {
        params: *params,
        seed,
        mode,
        horizon: steps,
        stride_spec: stride,
        samples,
    }
}
