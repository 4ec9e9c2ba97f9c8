//! Small dense-vector helpers over `&[f64]`.
//!
//! The nearest-action comparisons and the descent inequalities checked in
//! tests go through these same functions, so both sides round identically.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

#[inline]
pub fn sq_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc + x * x)
}

/// `½‖a‖²`.
#[inline]
pub fn half_sq_norm(a: &[f64]) -> f64 {
    0.5 * sq_norm(a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    sq_norm(a).sqrt()
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| {
        let d = x - y;
        acc + d * d
    })
}
