//! Standard normal CDF in linear and log space.

use statrs::function::erf::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Φ(z)`, finite for every finite `z`.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > -20.0 {
        let p = normal_cdf(z);
        // Φ(z) close to 1: ln(1 - q) keeps the tail digits.
        if p > 0.5 {
            (-normal_cdf(-z)).ln_1p()
        } else {
            p.ln()
        }
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// Probability-weighted mean and standard deviation of `values`.
pub fn weighted_mean_std(weights: &[f64], values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mean: f64 = weights.iter().zip(values.clone()).map(|(p, v)| p * v).sum();
    let var: f64 = weights.iter().zip(values).map(|(p, v)| p * (v - mean).powi(2)).sum();
    (mean, var.max(0.0).sqrt())
}
