//! Numerical kernels: quadrature, root finding, and test statistics.

pub mod quadrature;
pub mod root;
pub mod stats;

pub use quadrature::{integrate, AdaptiveSimpson, Integral};
pub use root::{bisect, invert_monotone};
pub use stats::std_normal_cdf;

/// Central-difference derivative with step `max(1e-6, 1e-6 |x|)`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
    let h = (1e-6 * x.abs()).max(1e-6);
    (f(x + h) - f(x - h)) / (2.0 * h)
}
