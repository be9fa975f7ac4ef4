//! Error-function helpers tuned for the differences that appear inside the
//! drifted range density, where both arguments sit deep in the same tail.

pub use libm::{erf, erfc};

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// `sqrt(2/pi)`
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
/// `sqrt(8/pi)`
pub const SQRT_8_OVER_PI: f64 = 1.595_769_121_605_730_7;
/// `1/sqrt(2 pi)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `erf(b) - erf(a)` without cancellation when `a` and `b` share a tail.
pub fn erf_diff(a: f64, b: f64) -> f64 {
    if a >= 0.0 && b >= 0.0 {
        erfc(a) - erfc(b)
    } else if a <= 0.0 && b <= 0.0 {
        erfc(-b) - erfc(-a)
    } else {
        erf(b) - erf(a)
    }
}

/// `exp(scale) * (erf(b) - erf(a))`, evaluated in log space for the tail
/// pieces so that a huge `exp(scale)` never meets an underflowed `erfc`.
pub fn scaled_erf_diff(scale: f64, a: f64, b: f64) -> f64 {
    let tail = |x: f64| -> f64 {
        // exp(scale) * erfc(x), x >= 0
        let e = erfc(x);
        if e > 0.0 {
            (scale + e.ln()).exp()
        } else {
            0.0
        }
    };
    if a >= 0.0 && b >= 0.0 {
        tail(a) - tail(b)
    } else if a <= 0.0 && b <= 0.0 {
        tail(-b) - tail(-a)
    } else {
        scale.exp() * (erf(b) - erf(a))
    }
}
