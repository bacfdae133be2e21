//! Scalar log-density helpers shared by the model and sampler.

use libm::erfc;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `log Σ exp(x_i)`, shifted by the maximum. Empty input gives `-inf`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

/// `log Φ(z)` for the standard normal CDF, accurate in the far lower tail.
pub fn log_std_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic Mills-ratio expansion; erfc underflows past this point.
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
        -0.5 * z2 - LN_SQRT_2PI - (-z).ln() + series.ln()
    }
}

/// `φ(z) / Φ(z)`, the derivative of `log Φ(z)`.
pub fn std_normal_inverse_mills(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI - log_std_normal_cdf(z)).exp()
}

/// Cauchy(0, scale) restricted to the positive half line.
pub fn half_cauchy_logpdf(x: f64, scale: f64) -> f64 {
    let u = x / scale;
    std::f64::consts::LN_2 - (std::f64::consts::PI * scale).ln() - u.mul_add(u, 1.0).ln()
}

/// SplitMix64 finaliser, used to derive independent seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
