//! Radial, translation-invariant kernels.
//!
//! Only the Gaussian family is provided. Each family must supply both the
//! forward evaluation and its radial inverse, since the worst-case
//! perturbation used by the certificates is built from the inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    /// `theta1 * exp(-|x - y|^2 / theta2)`
    Gaussian,
}

/// Kernel family with its output scale `theta1` and squared length scale `theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    theta1: f64,
    theta2: f64,
}

impl KernelSpec {
    pub fn gaussian(theta1: f64, theta2: f64) -> Result<Self> {
        if !(theta1.is_finite() && theta1 > 0.0) {
            return Err(Error::Config(format!("theta1 must be positive, got {theta1}")));
        }
        if !(theta2.is_finite() && theta2 > 0.0) {
            return Err(Error::Config(format!("theta2 must be positive, got {theta2}")));
        }
        Ok(Self {
            family: KernelFamily::Gaussian,
            theta1,
            theta2,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// Self-similarity `k(x, x)`, identical for every `x`.
    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.eval_squared_distance(squared_distance(x, y)?))
    }

    /// Kernel value for a precomputed squared Euclidean distance.
    pub fn eval_squared_distance(&self, d2: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => self.theta1 * (-d2 / self.theta2).exp(),
        }
    }

    pub fn eval_at_distance(&self, d: f64) -> f64 {
        self.eval_squared_distance(d * d)
    }

    /// Euclidean distance at which the kernel takes `value`.
    ///
    /// Accepts `0 < value <= theta1`.
    pub fn inverse_distance(&self, value: f64) -> Result<f64> {
        if !(value > 0.0 && value <= self.theta1) {
            return Err(Error::Domain(format!(
                "kernel value {value} not in (0, {}]",
                self.theta1
            )));
        }
        match self.family {
            KernelFamily::Gaussian => {
                // ln(theta1 / value) via ln_1p keeps precision when value ~ theta1.
                let ratio = value / self.theta1;
                let log_ratio = if ratio > 0.5 {
                    -(ratio - 1.0).ln_1p()
                } else {
                    -ratio.ln()
                };
                Ok((self.theta2 * log_ratio.max(0.0)).sqrt())
            }
        }
    }
}

/// Squared Euclidean distance with Neumaier-compensated accumulation.
pub fn squared_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(squared_distance_unchecked(x, y))
}

pub(crate) fn squared_distance_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        let term = d * d;
        let t = sum + term;
        if sum.abs() >= term {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn distance(x: &[f64], y: &[f64]) -> Result<f64> {
    squared_distance(x, y).map(f64::sqrt)
}
