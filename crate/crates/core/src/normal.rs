use std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF, `Phi(z) = erfc(-z / sqrt 2) / 2`.
///
/// Going through `erfc` keeps full relative precision in the lower tail.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Mass of `N(mean, variance)` below zero.
///
/// Zero variance degenerates to a point mass: 0 or 1 by the sign of `mean`,
/// and one half when `mean` is exactly zero.
pub fn mass_below_zero(mean: f64, variance: f64) -> f64 {
    if variance > 0.0 {
        std_normal_cdf(-mean / variance.sqrt())
    } else if mean > 0.0 {
        0.0
    } else if mean < 0.0 {
        1.0
    } else {
        0.5
    }
}
