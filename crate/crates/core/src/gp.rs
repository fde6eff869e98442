//! Noise-free Gaussian-process regression on a labelled dataset.
//!
//! The gram matrix `K + jitter * I` is factored once as `L L^T`; predictions
//! use triangular solves against `L`, never an explicit inverse.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::{squared_distance_unchecked, KernelSpec};

/// Default jitter relative to `theta1`.
pub const DEFAULT_RELATIVE_JITTER: f64 = 1e-10;

pub fn default_jitter(kernel: &KernelSpec) -> f64 {
    DEFAULT_RELATIVE_JITTER * kernel.theta1()
}

/// Predictive mean and variance at a query point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

/// Lower Cholesky factor of a symmetric positive-definite matrix (row-major).
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors the row-major `n x n` matrix `a`; only the lower triangle is read.
    pub fn new(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        for j in 0..n {
            let (top, below) = a.split_at_mut((j + 1) * n);
            let row_j = &mut top[j * n..];
            let diag = row_j[j] - row_j[..j].iter().map(|v| v * v).sum::<f64>();
            if !(diag > 0.0 && diag.is_finite()) {
                return Err(Error::SingularGram { pivot: j });
            }
            let ljj = diag.sqrt();
            row_j[j] = ljj;
            row_j[j + 1..].fill(0.0);
            let row_j = &row_j[..j];
            for row_i in below.chunks_exact_mut(n) {
                let dot: f64 = row_i[..j].iter().zip(row_j).map(|(a, b)| a * b).sum();
                row_i[j] = (row_i[j] - dot) / ljj;
            }
        }
        Ok(Self { n, lower: a })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.lower[i * self.n + j]
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - s) / self.lower[i * n + i];
        }
    }

    /// Solves `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * b[k];
            }
            b[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `(L L^T) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }
}

/// Row-major gram matrix of `points` (`n` rows of `dim`) plus `jitter` on the diagonal.
pub fn gram_matrix(points: &[f64], dim: usize, kernel: &KernelSpec, jitter: f64) -> Vec<f64> {
    let n = points.len() / dim;
    let theta1 = kernel.theta1();
    let mut k = vec![0.0; n * n];
    k.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = &points[i * dim..(i + 1) * dim];
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j {
                theta1 + jitter
            } else {
                let xj = &points[j * dim..(j + 1) * dim];
                kernel.eval_squared_distance(squared_distance_unchecked(xi, xj))
            };
        }
    });
    k
}

/// Factored covariance of a set of training inputs, independent of targets.
#[derive(Debug, Clone)]
pub struct GramFactor {
    points: Vec<f64>,
    dim: usize,
    kernel: KernelSpec,
    jitter: f64,
    factor: CholeskyFactor,
}

impl GramFactor {
    pub fn new(points: &[f64], dim: usize, kernel: KernelSpec, jitter: f64) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: points.len(),
            });
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::Config(format!("jitter must be nonnegative, got {jitter}")));
        }
        let n = points.len() / dim;
        let factor = CholeskyFactor::new(gram_matrix(points, dim, &kernel, jitter), n)?;
        Ok(Self {
            points: points.to_vec(),
            dim,
            kernel,
            jitter,
            factor,
        })
    }

    pub fn len(&self) -> usize {
        self.factor.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn cross_covariance(&self, query: &[f64]) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        Ok(self
            .points
            .chunks_exact(self.dim)
            .map(|x| self.kernel.eval_squared_distance(squared_distance_unchecked(x, query)))
            .collect())
    }

    /// Unclamped `k(q,q) - k_q^T (K + jitter I)^{-1} k_q`.
    pub fn raw_variance(&self, query: &[f64]) -> Result<f64> {
        let mut v = self.cross_covariance(query)?;
        self.factor.solve_lower_in_place(&mut v);
        Ok(self.kernel.theta1() - v.iter().map(|x| x * x).sum::<f64>())
    }
}

/// Fitted noise-free GP regressor with targets `+1` / `-1`.
#[derive(Debug)]
pub struct GpModel {
    dataset: LabeledDataset,
    gram: GramFactor,
    weights: Vec<f64>,
    clamp_count: AtomicU64,
}

impl Clone for GpModel {
    fn clone(&self) -> Self {
        Self {
            dataset: self.dataset.clone(),
            gram: self.gram.clone(),
            weights: self.weights.clone(),
            clamp_count: AtomicU64::new(self.clamp_count.load(Ordering::Relaxed)),
        }
    }
}

impl GpModel {
    pub fn fit(dataset: &LabeledDataset, kernel: KernelSpec, jitter: f64) -> Result<Self> {
        let gram = GramFactor::new(dataset.raw_points(), dataset.dim(), kernel, jitter)?;
        let weights = gram.factor.solve(&dataset.targets());
        Ok(Self {
            dataset: dataset.clone(),
            gram,
            weights,
            clamp_count: AtomicU64::new(0),
        })
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.gram.kernel
    }

    pub fn jitter(&self) -> f64 {
        self.gram.jitter
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.gram.factor
    }

    /// Number of predictions whose variance had to be clamped into `[0, theta1]`.
    pub fn clamp_count(&self) -> u64 {
        self.clamp_count.load(Ordering::Relaxed)
    }

    pub fn predict(&self, query: &[f64]) -> Result<PredictiveDistribution> {
        let mut v = self.gram.cross_covariance(query)?;
        let mean = v.iter().zip(&self.weights).map(|(k, w)| k * w).sum();
        self.gram.factor.solve_lower_in_place(&mut v);
        let theta1 = self.kernel().theta1();
        let raw = theta1 - v.iter().map(|x| x * x).sum::<f64>();
        let variance = raw.clamp(0.0, theta1);
        if variance != raw {
            self.clamp_count.fetch_add(1, Ordering::Relaxed);
        }
        Ok(PredictiveDistribution { mean, variance })
    }
}

/// Kernel scalars of a query against a `(x_plus, x_minus)` training pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScalars {
    /// `k(x, x)`
    pub theta1: f64,
    /// `k(x_plus, x_minus)`
    pub theta_s: f64,
    /// `k(x_plus, query)`
    pub theta_r1: f64,
    /// `k(x_minus, query)`
    pub theta_r2: f64,
}

impl PairScalars {
    /// Two-point predictive mean `(theta_r1 - theta_r2) / (theta1 - theta_s)`.
    pub fn mean(&self) -> f64 {
        (self.theta_r1 - self.theta_r2) / (self.theta1 - self.theta_s)
    }

    /// Two-point predictive variance, unclamped.
    pub fn variance(&self) -> f64 {
        let Self {
            theta1,
            theta_s,
            theta_r1,
            theta_r2,
        } = *self;
        theta1
            - (theta1 * (theta_r1 * theta_r1 + theta_r2 * theta_r2)
                - 2.0 * theta_s * theta_r1 * theta_r2)
                / (theta1 * theta1 - theta_s * theta_s)
    }
}

/// Closed-form prediction of the GP trained on `{(x_plus, +1), (x_minus, -1)}`.
pub fn two_point_predict(
    x_plus: &[f64],
    x_minus: &[f64],
    query: &[f64],
    kernel: &KernelSpec,
) -> Result<PredictiveDistribution> {
    let theta1 = kernel.theta1();
    let theta_s = kernel.eval(x_plus, x_minus)?;
    if theta_s >= theta1 {
        return Err(Error::DegeneratePair);
    }
    let scalars = PairScalars {
        theta1,
        theta_s,
        theta_r1: kernel.eval(x_plus, query)?,
        theta_r2: kernel.eval(x_minus, query)?,
    };
    Ok(PredictiveDistribution {
        mean: scalars.mean(),
        variance: scalars.variance().clamp(0.0, theta1),
    })
}

/// Predictive variance at `query` from the first `n` training points, for `n = 1..=N`.
///
/// Each prefix is factored independently with zero jitter; labels play no role.
pub fn variance_monotonicity_probe(
    dataset: &LabeledDataset,
    kernel: &KernelSpec,
    query: &[f64],
) -> Result<Vec<f64>> {
    let dim = dataset.dim();
    if query.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: query.len(),
        });
    }
    let theta1 = kernel.theta1();
    (1..=dataset.len())
        .map(|n| {
            let prefix = GramFactor::new(&dataset.raw_points()[..n * dim], dim, *kernel, 0.0)?;
            Ok(prefix.raw_variance(query)?.clamp(0.0, theta1))
        })
        .collect()
}
