//! Large-market Gaussian approximation of the efficient quantity and welfare.
//!
//! For a market with buyer law `F`, seller law `G` and ratio `λ = M/N`, the excess
//! demand curve `E(t) = F⁻¹(1 - t) - G⁻¹(min(t/λ, 1))` crosses zero at `t*`. The pair
//! `(K, W)` is approximately bivariate normal with mean `(N t*, N ∫₀^{t*} E)` and
//! covariance `N [[σ², κ], [κ, ς²]]`.

use serde::{Deserialize, Serialize};

use crate::distributions::{head_integral, tail_integral, Distribution};
use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::numeric::{bisect, AdaptiveSimpson};

/// Absolute tolerance of the crossing point.
pub const ROOT_TOL: f64 = 1e-12;
/// Quadrature nodes for `S` stay this far inside `(0, t*)`.
pub const ENDPOINT_CLIP: f64 = 1e-14;
pub const HITTING_GRID: usize = 4096;

/// `F⁻¹(1 - t) - G⁻¹(min(t/λ, 1))`.
pub fn excess_demand(spec: &MarketSpec, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfDomain {
            value: t,
            domain: "[0, 1]".into(),
        });
    }
    Ok(excess_demand_raw(spec, t))
}

fn excess_demand_raw(spec: &MarketSpec, t: f64) -> f64 {
    let lambda = spec.lambda();
    spec.buyer_law.quantile(1.0 - t) - spec.seller_law.quantile((t / lambda).min(1.0))
}

/// `sup { t ∈ (0, 1) : h(t) >= 0 }` for an arbitrary `h` with `h(0) > 0`.
///
/// Scans a 4096-point grid for the last nonnegative point and refines the following
/// sign change by bisection.
pub fn hitting_time<H: Fn(f64) -> f64>(h: H) -> Result<f64> {
    let h0 = h(0.0);
    if !(h0 > 0.0) {
        return Err(Error::NoPositiveStart(h0));
    }
    let step = 1.0 / HITTING_GRID as f64;
    let last = (0..=HITTING_GRID)
        .rev()
        .find(|&i| h(i as f64 * step) >= 0.0)
        .unwrap_or(0);
    if last == HITTING_GRID {
        return Ok(1.0);
    }
    let lo = last as f64 * step;
    let hi = (last + 1) as f64 * step;
    // Keep the invariant h(lo) >= 0 > h(hi) and shrink to the sup.
    let (mut a, mut b) = (lo, hi);
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if h(m) >= 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Root of a strictly decreasing `h` on `[0, upper]` by bisection.
pub fn hitting_time_monotone<H: Fn(f64) -> f64>(h: H, upper: f64) -> Result<f64> {
    let h0 = h(0.0);
    if !(h0 > 0.0) {
        return Err(Error::NoPositiveStart(h0));
    }
    let hu = h(upper);
    if hu >= 0.0 {
        return Err(Error::RootFinding(format!(
            "excess demand is still {hu} >= 0 at t={upper}; \
             the seller/buyer ratio is outside the admissible interval"
        )));
    }
    bisect(h, 0.0, upper, ROOT_TOL)
}

/// Upper end of the open interval `(0, λ ∧ 1)` on which `E` is smooth.
fn smooth_upper(spec: &MarketSpec) -> f64 {
    spec.lambda().min(1.0)
}

/// Crossing point `t*` of the excess demand curve.
pub fn crossing_point(spec: &MarketSpec) -> Result<f64> {
    hitting_time_monotone(|t| excess_demand_raw(spec, t), smooth_upper(spec))
}

fn check_open(t: f64, hi: f64) -> Result<()> {
    if t > 0.0 && t < hi {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            value: t,
            domain: format!("(0, {hi})"),
        })
    }
}

/// `E'(t) = -1/f(F⁻¹(1-t)) - 1/(λ g(G⁻¹(t/λ)))` on `(0, λ ∧ 1)`.
pub fn excess_demand_derivative(spec: &MarketSpec, t: f64) -> Result<f64> {
    check_open(t, smooth_upper(spec))?;
    Ok(derivative_raw(spec, t))
}

fn derivative_raw(spec: &MarketSpec, t: f64) -> f64 {
    let lambda = spec.lambda();
    -1.0 / spec.buyer_law.pdf_at_quantile(1.0 - t)
        - 1.0 / (lambda * spec.seller_law.pdf_at_quantile(t / lambda))
}

/// The covariance kernel
/// `S(t) = (1-t)/f(x) ∫_x^b (1-F) + (1-t/λ)/g(y) ∫_c^y G`, with `x = F⁻¹(1-t)` and
/// `y = G⁻¹(t/λ)`, on `(0, t*]`.
pub fn s_alpha(spec: &MarketSpec, t: f64) -> Result<f64> {
    let t_star = crossing_point(spec)?;
    if !(t > 0.0 && t <= t_star) {
        return Err(Error::OutOfDomain {
            value: t,
            domain: format!("(0, {t_star}]"),
        });
    }
    s_alpha_raw(spec, t)
}

fn s_alpha_raw(spec: &MarketSpec, t: f64) -> Result<f64> {
    let lambda = spec.lambda();
    let f: &dyn Distribution = spec.buyer_law.as_ref();
    let g: &dyn Distribution = spec.seller_law.as_ref();
    let s = t / lambda;
    let x = f.quantile(1.0 - t);
    let y = g.quantile(s);
    let buyer = (1.0 - t) / f.pdf_at_quantile(1.0 - t) * tail_integral(f, x)?;
    let seller = (1.0 - s) / g.pdf_at_quantile(s) * head_integral(g, y)?;
    Ok(buyer + seller)
}

/// Parameters of the approximating bivariate normal law of `(K, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianApprox {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub lambda: f64,
    pub t_alpha: f64,
    /// `N t*`
    pub mean_k: f64,
    /// `N ∫₀^{t*} E`
    pub mean_w: f64,
    /// `N σ²`
    pub var_k: f64,
    /// `N ς²`
    pub var_w: f64,
    /// `N κ`
    pub cov_kw: f64,
    pub e_prime_at_t: f64,
    pub s_at_t: f64,
    /// Per-buyer parameters `σ²`, `ς²`, `κ` and `∫₀^{t*} E`.
    pub sigma2: f64,
    pub varsigma2: f64,
    pub kappa: f64,
    pub mean_w_unit: f64,
    pub quadrature_error_estimate: f64,
    pub warnings: Vec<String>,
}

impl GaussianApprox {
    /// `κ / (σ ς)`; independent of `N`.
    pub fn correlation(&self) -> f64 {
        self.kappa / (self.sigma2 * self.varsigma2).sqrt()
    }

    /// Covariance of the standardized pair `((K - N t*)/√N, (W - N∫E)/√N)`.
    pub fn unit_cov(&self) -> [[f64; 2]; 2] {
        [[self.sigma2, self.kappa], [self.kappa, self.varsigma2]]
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        [[self.var_k, self.cov_kw], [self.cov_kw, self.var_w]]
    }
}

/// `correlation(approx)`, free-function form.
pub fn correlation(approx: &GaussianApprox) -> f64 {
    approx.correlation()
}

/// Computes the crossing point, the variance of the quantity, the welfare variance
/// `ς² = 2 ∫₀^{t*} S`, the covariance `κ = -S(t*)/E'(t*)` and the means.
pub fn gaussian_approx(spec: &MarketSpec) -> Result<GaussianApprox> {
    gaussian_approx_with(spec, AdaptiveSimpson::default())
}

pub fn gaussian_approx_with(spec: &MarketSpec, quad: AdaptiveSimpson) -> Result<GaussianApprox> {
    let lambda = spec.lambda();
    let mut warnings = Vec::new();
    let (a, _) = spec.buyer_law.support();
    let (_, d) = spec.seller_law.support();
    let eps = crate::distributions::DEFAULT_EPSILON;
    let lo = 1.0 - spec.buyer_law.cdf(d) + eps;
    let hi = 1.0 / (spec.seller_law.cdf(a) + eps);
    if !(lo <= lambda && lambda <= hi) {
        warnings.push(format!(
            "ratio {lambda} outside admissible interval [{lo}, {hi}] (epsilon={eps})"
        ));
    }

    let t = crossing_point(spec)?;
    let e_prime = derivative_raw(spec, t);
    if !(e_prime < 0.0) || !e_prime.is_finite() {
        return Err(Error::RootFinding(format!(
            "derivative of excess demand at t*={t} is {e_prime}, expected finite and negative"
        )));
    }
    let f1 = spec.buyer_law.pdf_at_quantile(1.0 - t);
    let g1 = spec.seller_law.pdf_at_quantile(t / lambda);
    let sigma2 = (t * (1.0 - t) / (f1 * f1) + t * (1.0 - t / lambda) / (lambda * lambda * g1 * g1))
        / (e_prime * e_prime);

    let mean_w = quad.integrate(|u| excess_demand_raw(spec, u), 0.0, t)?;

    // S may fail inside the closure; record the first error and surface it afterwards.
    let failure = std::cell::RefCell::new(None);
    let s_int = quad.integrate(
        |u| match s_alpha_raw(spec, u) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        ENDPOINT_CLIP,
        t - ENDPOINT_CLIP,
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let varsigma2 = 2.0 * s_int.value;
    let s_at_t = s_alpha_raw(spec, t)?;
    let kappa = -s_at_t / e_prime;

    let n = spec.n_buyers as f64;
    Ok(GaussianApprox {
        n_buyers: spec.n_buyers,
        n_sellers: spec.n_sellers,
        lambda,
        t_alpha: t,
        mean_k: n * t,
        mean_w: n * mean_w.value,
        var_k: n * sigma2,
        var_w: n * varsigma2,
        cov_kw: n * kappa,
        e_prime_at_t: e_prime,
        s_at_t,
        sigma2,
        varsigma2,
        kappa,
        mean_w_unit: mean_w.value,
        quadrature_error_estimate: mean_w.error_estimate + 2.0 * s_int.error_estimate,
        warnings,
    })
}

/// JSON document: `{t_alpha, mean, cov, diagnostics}` plus the market and per-buyer
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxDocument {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub lambda: f64,
    pub t_alpha: f64,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub unit: UnitParams,
    pub diagnostics: ApproxDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitParams {
    pub sigma2: f64,
    pub varsigma2: f64,
    pub kappa: f64,
    pub mean_w: f64,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxDiagnostics {
    pub e_prime: f64,
    pub s_at_t: f64,
    pub quadrature_error_estimate: f64,
    pub warnings: Vec<String>,
}

impl From<&GaussianApprox> for ApproxDocument {
    fn from(a: &GaussianApprox) -> Self {
        Self {
            n_buyers: a.n_buyers,
            n_sellers: a.n_sellers,
            lambda: a.lambda,
            t_alpha: a.t_alpha,
            mean: [a.mean_k, a.mean_w],
            cov: a.cov(),
            unit: UnitParams {
                sigma2: a.sigma2,
                varsigma2: a.varsigma2,
                kappa: a.kappa,
                mean_w: a.mean_w_unit,
                correlation: a.correlation(),
            },
            diagnostics: ApproxDiagnostics {
                e_prime: a.e_prime_at_t,
                s_at_t: a.s_at_t,
                quadrature_error_estimate: a.quadrature_error_estimate,
                warnings: a.warnings.clone(),
            },
        }
    }
}
