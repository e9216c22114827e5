//! Standard normal distribution helpers.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Density `φ(x)`.
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `Φ(x)`, accurate in the left tail.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`, accurate in the right tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `Φ⁻¹(u)` for `u ∈ (0, 1)`, polished by one Newton step; `±∞` at the ends.
pub fn quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let x = -SQRT_2 * erfc_inv(2.0 * u);
    let d = pdf(x);
    if d < 1e-300 {
        return x;
    }
    // Residual in whichever tail keeps precision.
    let r = if x < 0.0 { cdf(x) - u } else { (1.0 - u) - sf(x) };
    x - r / d
}

/// `∫_{-∞}^{x} Φ(t) dt = xΦ(x) + φ(x)`.
pub fn cdf_integral(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    x * cdf(x) + pdf(x)
}

/// `∫_{x}^{∞} (1 − Φ(t)) dt = φ(x) − x(1 − Φ(x))`.
pub fn sf_integral(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    pdf(x) - x * sf(x)
}

/// `E|Z| = √(2/π)`.
pub const MEAN_ABS: f64 = 0.797_884_560_802_865_4;
