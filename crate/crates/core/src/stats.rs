//! Small statistical helpers shared by the experiment modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a sequence.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    for v in values {
        s.add(v);
    }
    s.value()
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample standard deviation (denominator `n - 1`); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    // deviations from the first value are exact when all values agree
    let shifted: Vec<f64> = values.iter().map(|v| v - values[0]).collect();
    let m = mean(&shifted);
    (sum(shifted.iter().map(|v| (v - m) * (v - m))) / (values.len() - 1) as f64).sqrt()
}

/// Linear-interpolated quantile, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Ordinary least-squares line `y = intercept + slope * x` with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub points: usize,
}

/// Weighted least squares; `weights` of `None` means unit weights. With weights
/// taken as inverse variances the standard errors are the model-based ones,
/// otherwise they come from the residual scatter.
pub fn fit_line(x: &[f64], y: &[f64], weights: Option<&[f64]>, min_points: usize) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len();
    if n < min_points.max(2) {
        return Err(Error::TooFewPoints { needed: min_points.max(2), got: n });
    }
    let w: Vec<f64> = weights.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; n]);
    let sw = sum(w.iter().copied());
    let mx = sum((0..n).map(|i| w[i] * x[i])) / sw;
    let my = sum((0..n).map(|i| w[i] * y[i])) / sw;
    let sxx = sum((0..n).map(|i| w[i] * (x[i] - mx).powi(2)));
    let sxy = sum((0..n).map(|i| w[i] * (x[i] - mx) * (y[i] - my)));
    if sxx <= 0.0 {
        return Err(Error::Parameter { name: "x", reason: "abscissae are all equal".into() });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let scale = if weights.is_some() {
        1.0
    } else if n > 2 {
        sum((0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2))) / (n - 2) as f64
    } else {
        0.0
    };
    let slope_se = (scale / sxx).sqrt();
    let intercept_se = (scale * (1.0 / sw + mx * mx / sxx)).sqrt();
    Ok(LineFit { slope, intercept, slope_se, intercept_se, points: n })
}
