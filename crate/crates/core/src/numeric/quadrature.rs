//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Default relative tolerance used by the asymptotic formulas.
pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Default recursion limit.
pub const DEFAULT_MAX_DEPTH: u32 = 40;

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the Richardson error estimates over accepted panels.
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSimpson {
    pub rel_tol: f64,
    /// Absolute floor so integrals that are exactly zero terminate.
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveSimpson {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: 1e-15,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

impl AdaptiveSimpson {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[lo, hi]`. Reversed limits flip the sign.
    pub fn integrate<F>(&self, f: F, lo: f64, hi: f64) -> Result<Integral>
    where
        F: Fn(f64) -> f64,
    {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Quadrature {
                lo,
                hi,
                reason: "non-finite limits".into(),
            });
        }
        if lo == hi {
            return Ok(Integral {
                value: 0.0,
                error_estimate: 0.0,
                evaluations: 0,
            });
        }
        if hi < lo {
            let r = self.integrate(f, hi, lo)?;
            return Ok(Integral {
                value: -r.value,
                ..r
            });
        }

        let mut evals = 0usize;
        let mut eval = |x: f64| -> Result<f64> {
            evals += 1;
            let y = f(x);
            if y.is_finite() {
                Ok(y)
            } else {
                Err(Error::Quadrature {
                    lo,
                    hi,
                    reason: format!("integrand is {y} at x={x}"),
                })
            }
        };

        let fa = eval(lo)?;
        let fb = eval(hi)?;
        let fm = eval(0.5 * (lo + hi))?;
        let whole = simpson(lo, hi, fa, fm, fb);

        // Coarse first pass fixes the scale for the relative tolerance.
        let scale = whole.abs().max(self.abs_tol);
        let tol = (self.rel_tol * scale).max(self.abs_tol);

        let mut value = 0.0;
        let mut err = 0.0;
        // Explicit stack of (panel, tolerance, depth), left panel processed first.
        let mut stack = vec![(
            Panel {
                a: lo,
                b: hi,
                fa,
                fm,
                fb,
                whole,
            },
            tol,
            0u32,
        )];
        while let Some((p, tol, depth)) = stack.pop() {
            let m = 0.5 * (p.a + p.b);
            let flm = eval(0.5 * (p.a + m))?;
            let frm = eval(0.5 * (m + p.b))?;
            let left = simpson(p.a, m, p.fa, flm, p.fm);
            let right = simpson(m, p.b, p.fm, frm, p.fb);
            let delta = left + right - p.whole;
            if depth >= self.max_depth || delta.abs() <= 15.0 * tol {
                value += left + right + delta / 15.0;
                err += delta.abs() / 15.0;
                continue;
            }
            stack.push((
                Panel {
                    a: m,
                    b: p.b,
                    fa: p.fm,
                    fm: frm,
                    fb: p.fb,
                    whole: right,
                },
                0.5 * tol,
                depth + 1,
            ));
            stack.push((
                Panel {
                    a: p.a,
                    b: m,
                    fa: p.fa,
                    fm: flm,
                    fb: p.fm,
                    whole: left,
                },
                0.5 * tol,
                depth + 1,
            ));
        }

        Ok(Integral {
            value,
            error_estimate: err,
            evaluations: evals,
        })
    }
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates with the default tolerances.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    AdaptiveSimpson::default()
        .integrate(f, lo, hi)
        .map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0).unwrap();
        assert!((r - 0.0).abs() < 1e-14);
        let r = integrate(|x| x * x, 0.0, 0.5).unwrap();
        assert!((r - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_transcendental() {
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI).unwrap();
        assert!((r - 2.0).abs() < 1e-10);
        let r = integrate(f64::exp, -1.0, 1.0).unwrap();
        assert!((r - (1f64.exp() - (-1f64).exp())).abs() < 1e-10);
    }

    #[test]
    fn sqrt_endpoint_singularity_in_derivative() {
        // d/dx sqrt is unbounded at 0; adaptive refinement still converges.
        let r = integrate(f64::sqrt, 0.0, 1.0).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a = integrate(|x| x, 0.0, 1.0).unwrap();
        let b = integrate(|x| x, 1.0, 0.0).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn nan_integrand_is_an_error() {
        assert!(integrate(|x| (x - 0.5).ln(), 0.0, 1.0).is_err());
    }
}
