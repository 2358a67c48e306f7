use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid of angular frequencies centred on `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    center: f64,
    span: f64,
    values: Vec<f64>,
}

impl FrequencyGrid {
    /// `span` is the full width between the first and last sample.
    pub fn new(center: f64, span: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::Domain(format!("frequency grid needs at least 2 points, got {n_points}")));
        }
        if !(span > 0.0) || !center.is_finite() || !span.is_finite() {
            return Err(Error::Domain(format!("bad frequency grid: center {center}, span {span}")));
        }
        let step = span / (n_points - 1) as f64;
        let start = center - 0.5 * span;
        let values = (0..n_points).map(|k| start + step * k as f64).collect();
        Ok(FrequencyGrid { center, span, values })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.span / (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.values.len(), self.step())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    w
}

/// Evenly spaced samples including both end points.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let h = (stop - start) / (n - 1) as f64;
            (0..n).map(|k| start + h * k as f64).collect()
        }
    }
}

/// Returns the common spacing of `xs` or an error if it is not uniform.
pub fn uniform_step(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::Domain("grid needs at least 2 points".into()));
    }
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    if !(h > 0.0) {
        return Err(Error::Domain("grid must be strictly increasing".into()));
    }
    for (k, pair) in xs.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if (d - h).abs() > 1e-6 * h {
            return Err(Error::Domain(format!("grid is not uniform at index {k}: step {d:e} vs {h:e}")));
        }
    }
    Ok(h)
}
