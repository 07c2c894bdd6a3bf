//! Streaming and batch summary statistics.

use serde::{Deserialize, Serialize};

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; NaN below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn std_err(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Streaming co-moment of a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoMoment {
    pub x: Welford,
    pub y: Welford,
    c: f64,
}

impl CoMoment {
    pub fn push(&mut self, x: f64, y: f64) {
        let dx = x - self.x.mean();
        self.x.push(x);
        self.y.push(y);
        self.c += dx * (y - self.y.mean());
    }

    pub fn covariance(&self) -> f64 {
        let n = self.x.count();
        if n < 2 {
            return f64::NAN;
        }
        self.c / (n - 1) as f64
    }

    pub fn correlation(&self) -> f64 {
        self.covariance() / (self.x.variance() * self.y.variance()).sqrt()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased variance by the two-pass formula.
pub fn two_pass_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let (ss, s): (f64, f64) = xs
        .iter()
        .fold((0.0, 0.0), |(ss, s), &x| (ss + (x - m) * (x - m), s + (x - m)));
    (ss - s * s / xs.len() as f64) / (xs.len() - 1) as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mut c = CoMoment::default();
    for (&x, &y) in xs.iter().zip(ys) {
        c.push(x, y);
    }
    c.correlation()
}

/// Largest absolute difference between two equally long sequences.
pub fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_examples() {
        let w: Welford = [1.0, 2.0, 3.0, 4.0].into_iter().collect();
        assert_eq!(w.mean(), 2.5);
        assert!((w.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!(Welford::new().variance().is_nan());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]) - 0.9986).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn welford_matches_two_pass(xs in proptest::collection::vec(-1e6f64..1e6, 2..400)) {
            let w: Welford = xs.iter().copied().collect();
            let tp = two_pass_variance(&xs);
            prop_assert!((w.variance() - tp).abs() <= 1e-9 * tp.abs().max(1e-300) + 1e-12);
        }

        #[test]
        fn merge_equals_sequential(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let k = split.min(xs.len());
            let mut left: Welford = xs[..k].iter().copied().collect();
            let right: Welford = xs[k..].iter().copied().collect();
            left.merge(&right);
            let all: Welford = xs.iter().copied().collect();
            prop_assert_eq!(left.count(), all.count());
            prop_assert!((left.mean() - all.mean()).abs() < 1e-9);
            prop_assert!((left.variance() - all.variance()).abs() <= 1e-9 * all.variance().abs() + 1e-9);
        }
    }
}
