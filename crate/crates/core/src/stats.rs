//! Compensated summation and sample summaries.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Mean and standard error of a sample, reduced in index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, stderr: f64::NAN, count };
        }
        let mean = xs.iter().copied().collect::<KahanSum>().value() / count as f64;
        let sd = if count > 1 {
            let ss = xs.iter().map(|x| (x - mean) * (x - mean)).collect::<KahanSum>().value();
            (ss / (count - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        Self { mean, sd, stderr: sd / (count as f64).sqrt(), count }
    }

    /// 95% normal-approximation confidence interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.stderr, self.mean + 1.96 * self.stderr)
    }
}

/// Two estimates agree if their difference lies within the joint 95% interval.
pub fn agree_within_joint_ci(a: (f64, f64), b: (f64, f64)) -> bool {
    let (ma, sa) = a;
    let (mb, sb) = b;
    (ma - mb).abs() <= 1.96 * (sa * sa + sb * sb).sqrt()
}

/// Ordinary least squares slope and intercept of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
