//! Bracketed bisection for monotone functions.

use crate::error::{Error, Result};

pub const DEFAULT_ABS_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Finds the sign change of `f` on `[lo, hi]` by bisection.
///
/// Requires `f(lo)` and `f(hi)` to have opposite signs (zero counts as either).
/// The returned point is the midpoint of a final bracket narrower than `2 * tol`.
pub fn bisect<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::RootFinding(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() || flo.signum() == fhi.signum() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 2.0 * tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm.is_nan() {
            return Err(Error::RootFinding(format!("f({mid}) is NaN")));
        }
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Inverts a nondecreasing map on `[lo, hi]`: the smallest `x` with `map(x) >= y`,
/// clamped to the interval when `y` falls outside the range.
pub fn invert_monotone<F>(map: F, y: f64, lo: f64, hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    if map(lo) >= y {
        return lo;
    }
    if map(hi) <= y {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if map(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root() {
        let r = bisect(|t| 1.0 - 2.0 * t, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cubic_root() {
        let r = bisect(|x| x * x * x - 2.0, 0.0, 2.0, 1e-13).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_sign_change() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        assert!(bisect(|x| x, 1.0, 0.0, 1e-12).is_err());
    }

    #[test]
    fn inversion() {
        let x = invert_monotone(|x| 2.0 * x - 1.0, 0.5, 0.0, 1.0, 1e-13);
        assert!((x - 0.75).abs() < 1e-12);
        assert_eq!(invert_monotone(|x| x, -3.0, 0.0, 1.0, 1e-12), 0.0);
        assert_eq!(invert_monotone(|x| x, 3.0, 0.0, 1.0, 1e-12), 1.0);
    }
}
