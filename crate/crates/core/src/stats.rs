//! Small statistical helpers: Wilson score intervals and streaming moments.

use statrs::distribution::{ContinuousCDF, Normal};

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Two-sided standard normal quantile for a confidence level, e.g. 1.95996 at 0.95.
pub fn normal_quantile(confidence: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + confidence / 2.0)
}

/// Wilson score interval for a proportion `p_hat` observed over `n` trials.
/// `n` may be a (Kish) effective sample size.
pub fn wilson_interval(p_hat: f64, n: f64, confidence: f64) -> (f64, f64) {
    if n <= 0.0 {
        return (0.0, 1.0);
    }
    let z = normal_quantile(confidence);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p_hat + z2 / (2.0 * n)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Welford accumulator. Batches are reduced in a fixed order by the callers,
/// so results do not depend on scheduling.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::default();
        xs.iter().for_each(|&x| m.push(x));
        m
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}
