//! Floating-point helpers shared by every module.
//!
//! The core is `no_std`, so transcendental functions come from `libm`.

/// Absolute tolerance used for time and speed comparisons, scaled by
/// `max(1, |operand|)`.
pub const EPS: f64 = 1e-9;

/// Tolerance used when merging neighbouring step-function values.
pub(crate) const MERGE_EPS: f64 = 1e-12;

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// `|a - b| <= EPS * max(1, |a|, |b|)`.
#[inline]
pub fn approx_eq(a: f64, b: f64) -> bool {
    approx_eq_tol(a, b, EPS)
}

#[inline]
pub fn approx_eq_tol(a: f64, b: f64, tol: f64) -> bool {
    abs(a - b) <= tol * scale(a, b)
}

#[inline]
pub(crate) fn scale(a: f64, b: f64) -> f64 {
    let m = if abs(a) > abs(b) { abs(a) } else { abs(b) };
    if m > 1.0 {
        m
    } else {
        1.0
    }
}

/// `a <= b` up to the shared tolerance.
#[inline]
pub fn le_tol(a: f64, b: f64) -> bool {
    a <= b + EPS * scale(a, b)
}

#[inline]
pub(crate) fn fmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

#[inline]
pub(crate) fn fmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}
