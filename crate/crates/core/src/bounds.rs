//! Maximum-success-probability certificates.
//!
//! For a training pair `(x_plus, x_minus)` with `s = k(x_plus, x_minus)` and a
//! perturbation constrained to `k(x_plus, x*) = r`, the worst case over that
//! constraint set is the point `x*max` maximising `k(x_minus, x*)`. With
//! `theta_r1 = r` and `theta_r2 = k(x_minus, x*max)` the certificate reports
//!
//! ```text
//! mu      = (theta_r1 - theta_r2) / (theta1 - theta_s) - epsilon
//! sigma^2 = two-point predictive variance at x*max
//! exact   = Phi(-mu / sigma)
//! phi     = exp(-mu^2 / (2 sigma^2)) / 2
//! ```
//!
//! A certificate is valid only when the perturbation is shorter than the pair
//! distance (`theta_s < r`) and `mu > 0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::gp::PairScalars;
use crate::kernel::{squared_distance, squared_distance_unchecked, KernelSpec};
use crate::normal::std_normal_cdf;

/// `sigma^2` values in `[-SIGMA2_ROUNDOFF, 0]` are treated as round-off and floored.
pub const SIGMA2_ROUNDOFF: f64 = 1e-12;
pub const SIGMA2_FLOOR: f64 = 1e-300;
/// Allowed decrease between neighbouring grid values in [`monotonicity_scan`].
pub const MONOTONE_TOLERANCE: f64 = 1e-12;
/// Grid size used by [`dataset_certificate`] for its monotonicity check.
pub const DATASET_SCAN_POINTS: usize = 100;

/// A `+1` point and a `-1` point with their kernel value and distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossPair {
    pub x_plus: Vec<f64>,
    pub x_minus: Vec<f64>,
    pub plus_index: Option<usize>,
    pub minus_index: Option<usize>,
    /// `k(x_plus, x_minus)`
    pub s: f64,
    pub distance: f64,
}

impl CrossPair {
    /// Fails with [`Error::DegeneratePair`] unless `theta1 > s`, i.e. the
    /// pair's 2x2 gram matrix is positive definite.
    pub fn new(x_plus: &[f64], x_minus: &[f64], kernel: &KernelSpec) -> Result<Self> {
        let d2 = squared_distance(x_plus, x_minus)?;
        let s = kernel.eval_squared_distance(d2);
        if !(kernel.theta1() > s) {
            return Err(Error::DegeneratePair);
        }
        Ok(Self {
            x_plus: x_plus.to_vec(),
            x_minus: x_minus.to_vec(),
            plus_index: None,
            minus_index: None,
            s,
            distance: d2.sqrt(),
        })
    }

    pub fn from_dataset(
        dataset: &LabeledDataset,
        plus_index: usize,
        minus_index: usize,
        kernel: &KernelSpec,
    ) -> Result<Self> {
        let mut pair = Self::new(dataset.point(plus_index), dataset.point(minus_index), kernel)?;
        pair.plus_index = Some(plus_index);
        pair.minus_index = Some(minus_index);
        Ok(pair)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MspCertificate {
    pub plus_index: Option<usize>,
    pub minus_index: Option<usize>,
    pub pair_distance: f64,
    pub kernel: KernelSpec,
    pub r: f64,
    /// Euclidean length of the perturbation implied by `r`.
    pub perturbation_distance: f64,
    pub epsilon: f64,
    pub theta1: f64,
    pub theta_s: f64,
    pub theta_r1: f64,
    pub theta_r2: f64,
    pub mu: f64,
    pub sigma2: f64,
    /// Set when `sigma2` was round-off negative and replaced by [`SIGMA2_FLOOR`].
    pub sigma2_floored: bool,
    pub exact_tail: f64,
    pub phi_bound: f64,
    pub valid: bool,
}

impl MspCertificate {
    /// `exact_tail < phi_bound`, except where both have underflowed below `1e-15`.
    pub fn bound_chain_holds(&self) -> bool {
        self.exact_tail < self.phi_bound || (self.phi_bound < 1e-15 && self.exact_tail <= self.phi_bound)
    }
}

fn check_r(r: f64, kernel: &KernelSpec) -> Result<()> {
    if !(r > 0.0 && r < kernel.theta1()) {
        return Err(Error::Domain(format!(
            "r = {r} must lie in (0, theta1 = {})",
            kernel.theta1()
        )));
    }
    Ok(())
}

/// `k(x_minus, x*max)` over the set `{x* : k(x_plus, x*) = r}`.
///
/// For a radial kernel the set is a sphere of radius `d_r` around `x_plus`, and
/// the point of it closest to `x_minus` lies on the line through both points,
/// at distance `|d_s - d_r|` from `x_minus`.
pub fn x_star_max_theta_r2(pair: &CrossPair, r: f64, kernel: &KernelSpec) -> Result<f64> {
    check_r(r, kernel)?;
    let d_r = kernel.inverse_distance(r)?;
    Ok(theta_r2_for_distances(pair.distance, d_r, kernel))
}

fn theta_r2_for_distances(d_s: f64, d_r: f64, kernel: &KernelSpec) -> f64 {
    kernel.eval_at_distance((d_s - d_r).abs())
}

fn assemble(
    scalars: PairScalars,
    r: f64,
    epsilon: f64,
) -> Result<(f64, f64, bool, f64, f64, bool)> {
    let mu = scalars.mean() - epsilon;
    let mut sigma2 = scalars.variance();
    let mut floored = false;
    if sigma2 <= 0.0 {
        if sigma2 < -SIGMA2_ROUNDOFF || sigma2.is_nan() {
            return Err(Error::NonPositiveSigma { sigma2 });
        }
        sigma2 = SIGMA2_FLOOR;
        floored = true;
    }
    let z = mu / sigma2.sqrt();
    let exact_tail = std_normal_cdf(-z);
    let phi_bound = 0.5 * (-0.5 * z * z).exp();
    let valid = scalars.theta_s < r && mu > 0.0;
    Ok((mu, sigma2, floored, exact_tail, phi_bound, valid))
}

pub fn msp_certificate(
    pair: &CrossPair,
    r: f64,
    epsilon: f64,
    kernel: &KernelSpec,
) -> Result<MspCertificate> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let theta1 = kernel.theta1();
    if !(theta1 > pair.s) {
        return Err(Error::DegeneratePair);
    }
    let theta_r2 = x_star_max_theta_r2(pair, r, kernel)?;
    let scalars = PairScalars {
        theta1,
        theta_s: pair.s,
        theta_r1: r,
        theta_r2,
    };
    let (mu, sigma2, sigma2_floored, exact_tail, phi_bound, valid) = assemble(scalars, r, epsilon)?;
    Ok(MspCertificate {
        plus_index: pair.plus_index,
        minus_index: pair.minus_index,
        pair_distance: pair.distance,
        kernel: *kernel,
        r,
        perturbation_distance: kernel.inverse_distance(r)?,
        epsilon,
        theta1,
        theta_s: pair.s,
        theta_r1: r,
        theta_r2,
        mu,
        sigma2,
        sigma2_floored,
        exact_tail,
        phi_bound,
        valid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub s: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub exact_tail: f64,
    pub phi_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// `phi_bound` is non-decreasing in `s` over the grid, within [`MONOTONE_TOLERANCE`].
    pub monotone: bool,
    pub table: Vec<ScanRow>,
}

/// Evaluates the bound as a function of the pair kernel value `s` at fixed `r`.
///
/// Every grid value must lie in `(0, r)` and the grid must be strictly ascending.
pub fn monotonicity_scan(
    kernel: &KernelSpec,
    r: f64,
    epsilon: f64,
    s_grid: &[f64],
) -> Result<MonotonicityReport> {
    check_r(r, kernel)?;
    if s_grid.is_empty() {
        return Err(Error::Domain("scan grid is empty".into()));
    }
    if let Some(bad) = s_grid.iter().find(|&&s| !(s > 0.0 && s < r)) {
        return Err(Error::Domain(format!("grid value s = {bad} not in (0, r = {r})")));
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("scan grid must be strictly ascending".into()));
    }
    let d_r = kernel.inverse_distance(r)?;
    let table = s_grid
        .iter()
        .map(|&s| {
            let d_s = kernel.inverse_distance(s)?;
            let scalars = PairScalars {
                theta1: kernel.theta1(),
                theta_s: s,
                theta_r1: r,
                theta_r2: theta_r2_for_distances(d_s, d_r, kernel),
            };
            let (mu, sigma2, _, exact_tail, phi_bound, _) = assemble(scalars, r, epsilon)?;
            Ok(ScanRow {
                s,
                mu,
                sigma2,
                exact_tail,
                phi_bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = table
        .windows(2)
        .all(|w| w[1].phi_bound - w[0].phi_bound >= -MONOTONE_TOLERANCE);
    Ok(MonotonicityReport { monotone, table })
}

/// Ascending grid of `n` points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Closest cross-label pair: `(plus_index, minus_index, squared distance)`.
///
/// Exhaustive over `D+ x D-`; ties go to the lowest `(plus, minus)` index pair.
pub fn closest_cross_pair(dataset: &LabeledDataset) -> (usize, usize, f64) {
    let plus = dataset.indices_of(Label::Plus);
    let minus = dataset.indices_of(Label::Minus);
    plus.par_iter()
        .map(|&i| {
            let (j, d2) = nearest_in(dataset, i, &minus);
            (i, j, d2)
        })
        .reduce_with(|a, b| if b.2 < a.2 || (b.2 == a.2 && b.0 < a.0) { b } else { a })
        .expect("dataset has both classes")
}

/// Nearest point to `dataset[i]` among `candidates` (lowest index on ties).
pub(crate) fn nearest_in(dataset: &LabeledDataset, i: usize, candidates: &[usize]) -> (usize, f64) {
    let x = dataset.point(i);
    let mut best = (usize::MAX, f64::INFINITY);
    for &j in candidates {
        let d2 = squared_distance_unchecked(x, dataset.point(j));
        if d2 < best.1 {
            best = (j, d2);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetCertificate {
    pub certificate: MspCertificate,
    pub monotonicity: MonotonicityReport,
    /// Valid certificate whose bound is also monotone over the dataset's range of `s`.
    pub certifying: bool,
}

/// Bound for every `+1` point, taken from the globally closest cross pair.
///
/// The monotonicity scan covers `s` from the smallest per-point nearest-enemy
/// kernel value up to the global maximum, clipped to `(0, r)`.
pub fn dataset_certificate(
    dataset: &LabeledDataset,
    r: f64,
    epsilon: f64,
    kernel: &KernelSpec,
) -> Result<DatasetCertificate> {
    check_r(r, kernel)?;
    let (i, j, _) = closest_cross_pair(dataset);
    let pair = CrossPair::from_dataset(dataset, i, j, kernel)?;
    let certificate = msp_certificate(&pair, r, epsilon, kernel)?;

    let minus = dataset.indices_of(Label::Minus);
    let s_lo = dataset
        .indices_of(Label::Plus)
        .iter()
        .map(|&p| kernel.eval_squared_distance(nearest_in(dataset, p, &minus).1))
        .fold(f64::INFINITY, f64::min)
        .max(f64::MIN_POSITIVE);
    let s_hi = pair.s.min(r * (1.0 - 1e-9));
    let monotonicity = if s_lo <= s_hi {
        let n = if s_lo == s_hi { 1 } else { DATASET_SCAN_POINTS };
        monotonicity_scan(kernel, r, epsilon, &linear_grid(s_lo, s_hi, n))?
    } else {
        MonotonicityReport {
            monotone: true,
            table: Vec::new(),
        }
    };
    Ok(DatasetCertificate {
        certifying: certificate.valid && monotonicity.monotone,
        certificate,
        monotonicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> KernelSpec {
        KernelSpec::gaussian(1.0, 1.0).unwrap()
    }

    fn pair_0_2() -> CrossPair {
        CrossPair::new(&[0.0], &[2.0], &unit()).unwrap()
    }

    #[test]
    fn x_star_max_example() {
        let r = (-0.25_f64).exp();
        let t = x_star_max_theta_r2(&pair_0_2(), r, &unit()).unwrap();
        assert!((t - 0.105_399_224_561_864_34).abs() < 1e-15);
    }

    #[test]
    fn x_star_max_midpoint_gives_r() {
        let r = unit().eval_at_distance(1.0);
        let t = x_star_max_theta_r2(&pair_0_2(), r, &unit()).unwrap();
        assert!((t - r).abs() < 1e-14);
    }

    #[test]
    fn x_star_max_tends_to_theta_s() {
        let r = unit().eval_at_distance(1e-6);
        let t = x_star_max_theta_r2(&pair_0_2(), r, &unit()).unwrap();
        assert!(t > pair_0_2().s);
        assert!((t - pair_0_2().s).abs() < 1e-7);
    }

    #[test]
    fn x_star_max_rejects_r_at_theta1() {
        assert!(matches!(
            x_star_max_theta_r2(&pair_0_2(), 1.0, &unit()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn certificate_example() {
        let c = msp_certificate(&pair_0_2(), (-0.25_f64).exp(), 0.0, &unit()).unwrap();
        assert!((c.mu - 0.685_965_454_056_180_1).abs() < 1e-14);
        assert!((c.sigma2 - 0.385_160_966_617_203_8).abs() < 1e-14);
        assert!((c.exact_tail - 0.134_514_290_425_074_8).abs() < 1e-13);
        assert!((c.phi_bound - 0.271_445_506_660_834_1).abs() < 1e-13);
        assert!(c.valid);
        assert!(c.bound_chain_holds());
        assert!(!c.sigma2_floored);
    }

    #[test]
    fn certificate_invalid_at_r_equal_theta_s() {
        let p = pair_0_2();
        let c = msp_certificate(&p, p.s, 0.0, &unit()).unwrap();
        assert!(!c.valid);
    }

    #[test]
    fn certificate_invalid_for_large_epsilon() {
        let c = msp_certificate(&pair_0_2(), (-0.25_f64).exp(), 0.7, &unit()).unwrap();
        assert!(c.mu <= 0.0);
        assert!(!c.valid);
    }

    #[test]
    fn certificate_invalid_past_half_distance() {
        // d_r = 1.2 > d_s / 2: the worst-case point is closer to x_minus.
        let r = unit().eval_at_distance(1.2);
        let c = msp_certificate(&pair_0_2(), r, 0.0, &unit()).unwrap();
        assert!(c.mu < 0.0);
        assert!(!c.valid);
    }

    #[test]
    fn rejects_coincident_pair() {
        assert!(matches!(
            CrossPair::new(&[1.0, 2.0], &[1.0, 2.0], &unit()),
            Err(Error::DegeneratePair)
        ));
    }

    #[test]
    fn zero_perturbation_limit() {
        let d_s = 2.0;
        let r = unit().eval_at_distance(1e-3 * d_s);
        let c = msp_certificate(&pair_0_2(), r, 0.0, &unit()).unwrap();
        assert!(c.valid);
        assert!((c.mu - 1.0).abs() < 1e-2);
        assert!(c.exact_tail < 1e-6);
    }

    #[test]
    fn scan_single_point_is_monotone() {
        let r = unit().eval_at_distance(0.5);
        let rep = monotonicity_scan(&unit(), r, 0.0, &[0.01]).unwrap();
        assert!(rep.monotone);
        assert_eq!(rep.table.len(), 1);
    }

    #[test]
    fn scan_rejects_s_at_or_above_r() {
        let r = unit().eval_at_distance(0.5);
        assert!(matches!(
            monotonicity_scan(&unit(), r, 0.0, &[0.01, r]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(monotonicity_scan(&unit(), r, 0.0, &[]), Err(Error::Domain(_))));
        assert!(matches!(
            monotonicity_scan(&unit(), r, 0.0, &[0.2, 0.1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn dataset_certificate_two_points() {
        let d = LabeledDataset::from_rows(&[vec![0.0], vec![2.0]], vec![Label::Plus, Label::Minus])
            .unwrap();
        let r = (-0.25_f64).exp();
        let dc = dataset_certificate(&d, r, 0.0, &unit()).unwrap();
        let direct = msp_certificate(&CrossPair::from_dataset(&d, 0, 1, &unit()).unwrap(), r, 0.0, &unit())
            .unwrap();
        assert_eq!(dc.certificate, direct);
        assert!(dc.monotonicity.monotone);
        assert!(dc.certifying);
    }

    #[test]
    fn dataset_certificate_ties_take_lowest_indices() {
        // Square with opposite labels on each side: four pairs at distance 1.
        let d = LabeledDataset::from_rows(
            &[vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![Label::Plus, Label::Plus, Label::Minus, Label::Minus],
        )
        .unwrap();
        let k = KernelSpec::gaussian(1.0, 10.0).unwrap();
        let r = k.eval_at_distance(0.2);
        let dc = dataset_certificate(&d, r, 0.0, &k).unwrap();
        assert_eq!(dc.certificate.plus_index, Some(0));
        assert_eq!(dc.certificate.minus_index, Some(2));
        for (i, j) in [(0, 3), (1, 2), (1, 3)] {
            let c = msp_certificate(&CrossPair::from_dataset(&d, i, j, &k).unwrap(), r, 0.0, &k).unwrap();
            assert_eq!(c.exact_tail, dc.certificate.exact_tail);
            assert_eq!(c.phi_bound, dc.certificate.phi_bound);
        }
    }

    #[test]
    fn linear_grid_endpoints() {
        let g = linear_grid(0.1, 0.7, 7);
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[6], 0.7);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
