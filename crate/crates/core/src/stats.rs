//! Sample estimators with standard errors.
//!
//! Sums are compensated (Neumaier) and always taken in slice order, so a
//! statistic depends only on the values and never on how they were produced.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Standard error of `value`.
    pub stderr: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            n_samples: 0,
        }
    }

    /// Multiplies value and standard error by a constant.
    pub fn scale(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
            n_samples: self.n_samples,
        }
    }

    /// `|value - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let dev = (self.value - target).abs();
        if self.stderr > 0.0 {
            dev / self.stderr
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Compensated sum of an iterator, accumulated in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean with the standard error from the unbiased sample variance.
///
/// Fewer than two samples give a zero standard error.
pub fn mean_with_stderr(values: &[f64]) -> EstimateWithError {
    let n = values.len();
    if n == 0 {
        return EstimateWithError {
            value: f64::NAN,
            stderr: f64::NAN,
            n_samples: 0,
        };
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    let stderr = if n > 1 {
        let ss = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (n as f64 - 1.0) / n as f64).sqrt()
    } else {
        0.0
    };
    EstimateWithError {
        value: mean,
        stderr,
        n_samples: n,
    }
}

/// Ratio of means `Σa / Σb` of paired per-unit quantities, with a
/// delta-method standard error.
pub fn ratio_of_means(num: &[f64], den: &[f64]) -> EstimateWithError {
    assert_eq!(num.len(), den.len());
    let n = num.len();
    let a = neumaier_sum(num.iter().copied()) / n as f64;
    let b = neumaier_sum(den.iter().copied()) / n as f64;
    let ratio = a / b;
    let stderr = if n > 1 {
        let resid = neumaier_sum(
            num.iter()
                .zip(den)
                .map(|(x, y)| (x - ratio * y) * (x - ratio * y)),
        );
        (resid / (n as f64 - 1.0) / n as f64).sqrt() / b.abs()
    } else {
        0.0
    };
    EstimateWithError {
        value: ratio,
        stderr,
        n_samples: n,
    }
}

/// Slope of an ordinary least-squares line through `(t, y)`.
pub fn ols_slope(t: &[f64], y: &[f64]) -> f64 {
    let weights = ols_slope_weights(t);
    neumaier_sum(weights.iter().zip(y).map(|(w, y)| w * y))
}

/// Weights `w` such that the OLS slope of `y` against `t` is `Σ wᵢ yᵢ`.
pub fn ols_slope_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let mean = neumaier_sum(t.iter().copied()) / n;
    let sxx = neumaier_sum(t.iter().map(|x| (x - mean) * (x - mean)));
    t.iter().map(|x| (x - mean) / sxx).collect()
}
