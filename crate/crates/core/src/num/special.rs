//! Special functions: stable Gaussian log-CDF and friends.
//!
//! `log_ndtr` switches to a Mills-ratio continued fraction for arguments
//! below -8, where the erfc route loses relative accuracy and eventually
//! underflows. The continued fraction converges to machine precision in that
//! regime, which keeps probit links usable for predictor envelopes far beyond
//! the underflow point of `Phi`.

use statrs::function::erf::erfc;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x - 0.5 * LN_2PI).exp()
}

/// Log of the standard normal density.
pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * LN_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Phi(z)) / phi(z)` for z > 0 via the continued fraction
/// `M(z) = 1/(z + 1/(z + 2/(z + 3/(...))))`, evaluated bottom-up. Depth 512
/// reaches machine precision down to the z = 2 handoff.
fn mills_ratio(z: f64) -> f64 {
    debug_assert!(z > 0.0);
    let mut f = 0.0;
    for k in (1..=512).rev() {
        f = k as f64 / (z + f);
    }
    1.0 / (z + f)
}

/// Log of the standard normal CDF, accurate over the whole real line.
///
/// The erfc route loses relative accuracy in the lower tail (and underflows
/// past -37), so everything below -2 goes through the Mills continued
/// fraction instead.
pub fn log_ndtr(x: f64) -> f64 {
    if x > -2.0 {
        let c = norm_cdf(x);
        if c >= 1.0 {
            // log(Phi) ~ -(1 - Phi) for Phi near 1; erfc gives the tail.
            return -0.5 * erfc(x * FRAC_1_SQRT_2);
        }
        c.ln()
    } else {
        // Phi(x) = phi(x) * M(-x) in the lower tail.
        log_norm_pdf(x) + mills_ratio(-x).ln()
    }
}

/// `phi(x) / Phi(x)`, the inverse Mills ratio, stable in the lower tail.
pub fn inv_mills_lower(x: f64) -> f64 {
    if x > -2.0 {
        norm_pdf(x) / norm_cdf(x).max(f64::MIN_POSITIVE)
    } else {
        1.0 / mills_ratio(-x)
    }
}
