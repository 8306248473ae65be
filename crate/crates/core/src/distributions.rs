//! Continuous laws on compact supports, inverse-CDF sampling, and numerical checks of
//! the regularity assumptions the large-market approximation relies on.

use std::fmt;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{central_difference, integrate};

/// A continuous distribution on `[support_lo, support_hi]`.
///
/// `pdf_derivative`, `tail_integral` and `head_integral` are optional closed forms;
/// callers go through [`pdf_derivative`], [`tail_integral`] and [`head_integral`],
/// which fall back to numerics when a family returns `None`.
pub trait Distribution: fmt::Debug + Send + Sync {
    fn support(&self) -> (f64, f64);
    fn cdf(&self, x: f64) -> f64;
    fn quantile(&self, u: f64) -> f64;
    fn pdf(&self, x: f64) -> f64;

    fn pdf_derivative(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `∫_x^hi (1 - F(u)) du`
    fn tail_integral(&self, _x: f64) -> Option<f64> {
        None
    }

    /// `∫_lo^x F(u) du`
    fn head_integral(&self, _x: f64) -> Option<f64> {
        None
    }

    /// Density at the `u`-quantile. Pushforward laws override this to skip an inversion.
    fn pdf_at_quantile(&self, u: f64) -> f64 {
        self.pdf(self.quantile(u))
    }

    /// Stable human-readable identity, used in config digests.
    fn descriptor(&self) -> String;
}

pub type SharedDistribution = Arc<dyn Distribution>;

/// Density derivative, with a central-difference fallback.
pub fn pdf_derivative(d: &dyn Distribution, x: f64) -> f64 {
    if let Some(v) = d.pdf_derivative(x) {
        return v;
    }
    let (lo, hi) = d.support();
    let h = (1e-6 * x.abs()).max(1e-6);
    if x - h < lo {
        (d.pdf(x + h) - d.pdf(x)) / h
    } else if x + h > hi {
        (d.pdf(x) - d.pdf(x - h)) / h
    } else {
        central_difference(|y| d.pdf(y), x)
    }
}

/// `∫_x^hi (1 - F(u)) du`, closed form when available.
pub fn tail_integral(d: &dyn Distribution, x: f64) -> Result<f64> {
    match d.tail_integral(x) {
        Some(v) => Ok(v),
        None => tail_integral_numeric(d, x),
    }
}

/// `∫_lo^x F(u) du`, closed form when available.
pub fn head_integral(d: &dyn Distribution, x: f64) -> Result<f64> {
    match d.head_integral(x) {
        Some(v) => Ok(v),
        None => head_integral_numeric(d, x),
    }
}

pub fn tail_integral_numeric(d: &dyn Distribution, x: f64) -> Result<f64> {
    let (_, hi) = d.support();
    if x >= hi {
        return Ok(0.0);
    }
    integrate(|u| 1.0 - d.cdf(u), x, hi)
}

pub fn head_integral_numeric(d: &dyn Distribution, x: f64) -> Result<f64> {
    let (lo, _) = d.support();
    if x <= lo {
        return Ok(0.0);
    }
    integrate(|u| d.cdf(u), lo, x)
}

/// Uniform law on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uniform {
    lo: f64,
    hi: f64,
}

impl Uniform {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidBounds { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Distribution for Uniform {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn cdf(&self, x: f64) -> f64 {
        ((x - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        self.lo + u * self.width()
    }

    fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            0.0
        } else {
            1.0 / self.width()
        }
    }

    fn pdf_derivative(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn tail_integral(&self, x: f64) -> Option<f64> {
        let x = x.clamp(self.lo, self.hi);
        Some((self.hi - x).powi(2) / (2.0 * self.width()))
    }

    fn head_integral(&self, x: f64) -> Option<f64> {
        let x = x.clamp(self.lo, self.hi);
        Some((x - self.lo).powi(2) / (2.0 * self.width()))
    }

    fn descriptor(&self) -> String {
        format!("uniform({:?},{:?})", self.lo, self.hi)
    }
}

/// Power law `F(x) = x^p` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    exponent: f64,
}

impl Power {
    pub fn new(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0) || !exponent.is_finite() {
            return Err(Error::InvalidParameter {
                name: "exponent",
                value: exponent,
                reason: "must be positive and finite",
            });
        }
        Ok(Self { exponent })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

impl Distribution for Power {
    fn support(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn cdf(&self, x: f64) -> f64 {
        x.clamp(0.0, 1.0).powf(self.exponent)
    }

    fn quantile(&self, u: f64) -> f64 {
        u.clamp(0.0, 1.0).powf(1.0 / self.exponent)
    }

    fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let p = self.exponent;
        if p == 1.0 {
            1.0
        } else {
            p * x.powf(p - 1.0)
        }
    }

    fn pdf_derivative(&self, x: f64) -> Option<f64> {
        let p = self.exponent;
        if p == 1.0 {
            Some(0.0)
        } else if p == 2.0 {
            Some(2.0)
        } else {
            Some(p * (p - 1.0) * x.powf(p - 2.0))
        }
    }

    fn tail_integral(&self, x: f64) -> Option<f64> {
        let p = self.exponent;
        let x = x.clamp(0.0, 1.0);
        Some((1.0 - x) - (1.0 - x.powf(p + 1.0)) / (p + 1.0))
    }

    fn head_integral(&self, x: f64) -> Option<f64> {
        let p = self.exponent;
        let x = x.clamp(0.0, 1.0);
        Some(x.powf(p + 1.0) / (p + 1.0))
    }

    fn descriptor(&self) -> String {
        format!("power({:?})", self.exponent)
    }
}

/// Hides the closed-form integrals and density derivative of the wrapped law, forcing
/// the numeric fallbacks. Used to cross-check the two integration routes.
#[derive(Debug, Clone)]
pub struct NumericOnly(pub SharedDistribution);

impl Distribution for NumericOnly {
    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }
    fn quantile(&self, u: f64) -> f64 {
        self.0.quantile(u)
    }
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }
    fn pdf_at_quantile(&self, u: f64) -> f64 {
        self.0.pdf_at_quantile(u)
    }
    fn descriptor(&self) -> String {
        format!("numeric({})", self.0.descriptor())
    }
}

pub fn make_uniform(lo: f64, hi: f64) -> Result<SharedDistribution> {
    Ok(Arc::new(Uniform::new(lo, hi)?))
}

pub fn make_power(exponent: f64) -> Result<SharedDistribution> {
    Ok(Arc::new(Power::new(exponent)?))
}

/// Inverse-CDF sampling: `quantile(U_i)` for `n` uniforms on the open unit interval.
pub fn sample<R: Rng + ?Sized>(dist: &dyn Distribution, rng: &mut R, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| dist.quantile(rng.sample::<f64, _>(Open01)))
        .collect()
}

/// JSON form: `{"family": "uniform", "params": {"lo": 0, "hi": 1}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum DistributionConfig {
    Uniform(UniformParams),
    Power(PowerParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    #[serde(default)]
    pub lo: f64,
    #[serde(default = "one")]
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerParams {
    pub exponent: f64,
}

fn one() -> f64 {
    1.0
}

impl DistributionConfig {
    pub fn build(&self) -> Result<SharedDistribution> {
        match self {
            DistributionConfig::Uniform(p) => make_uniform(p.lo, p.hi),
            DistributionConfig::Power(p) => make_power(p.exponent),
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Outcome of the numerical regularity checks. Failures are flags, never errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionReport {
    pub overlap_ok: bool,
    pub a1_ok: bool,
    pub a1_density_min: f64,
    pub a1_density_max: f64,
    pub a2_ok: bool,
    pub a2_interval: (f64, f64),
    pub epsilon: f64,
    /// Seller/buyer ratio checked against the interval, when a market was supplied.
    pub lambda: Option<f64>,
    pub lambda_in_interval: Option<bool>,
    pub a3_ok: bool,
    pub a3_bound: f64,
    pub grid_size: usize,
    pub warnings: Vec<String>,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.a1_ok && self.a2_ok && self.a3_ok && self.lambda_in_interval.unwrap_or(true)
    }
}

/// Min and max density over `grid` equally spaced points of the closed support.
fn density_range(d: &dyn Distribution, grid: usize) -> (f64, f64) {
    let (lo, hi) = d.support();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in 0..grid {
        let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
        let p = d.pdf(x);
        let p = if p.is_nan() { f64::INFINITY } else { p };
        min = min.min(p);
        max = max.max(p);
    }
    (min, max)
}

/// `max |f'(Q(t)) / f(Q(t))^3|` over the interior grid `t = i / (grid + 1)`.
fn quantile_density_slope_bound(d: &dyn Distribution, grid: usize) -> f64 {
    let mut bound = 0.0f64;
    for i in 1..=grid {
        let t = i as f64 / (grid + 1) as f64;
        let x = d.quantile(t);
        let f = d.pdf(x);
        let v = (pdf_derivative(d, x) / f.powi(3)).abs();
        bound = bound.max(if v.is_nan() { f64::INFINITY } else { v });
    }
    bound
}

/// Checks overlap, density bounds, the admissible ratio interval, and boundedness of
/// the quantile-density slope for a buyer law `f` and seller law `g`.
///
/// Boundedness on `(0,1)` is probed by refining the grid fourfold: a bound that grows
/// by more than 10% under refinement is reported as unbounded.
pub fn validate_assumptions(
    f: &dyn Distribution,
    g: &dyn Distribution,
    epsilon: f64,
    grid: usize,
    lambda: Option<f64>,
) -> Result<AssumptionReport> {
    if grid < 16 {
        return Err(Error::InvalidParameter {
            name: "grid",
            value: grid as f64,
            reason: "must be at least 16",
        });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "must be positive",
        });
    }
    let mut warnings = Vec::new();
    let (a, b) = f.support();
    let (c, d) = g.support();

    let overlap_ok = a < d && c < b;
    if !overlap_ok {
        warnings.push(format!(
            "supports [{a}, {b}] and [{c}, {d}] do not overlap (need a < d and c < b)"
        ));
    }

    let (fmin, fmax) = density_range(f, grid);
    let (gmin, gmax) = density_range(g, grid);
    let density_min = fmin.min(gmin);
    let density_max = fmax.max(gmax);
    let densities_ok = density_min > 0.0 && density_max.is_finite();
    if !densities_ok {
        warnings.push(format!(
            "densities not bounded and bounded away from zero on the supports \
             (min {density_min}, max {density_max}); computation proceeds"
        ));
    }
    let a1_ok = overlap_ok && densities_ok;

    let lo = 1.0 - f.cdf(d) + epsilon;
    let hi = 1.0 / (g.cdf(a) + epsilon);
    let a2_ok = lo <= hi;
    if !a2_ok {
        warnings.push(format!(
            "ratio interval [{lo}, {hi}] is empty for epsilon={epsilon}"
        ));
    }
    let lambda_in_interval = lambda.map(|l| a2_ok && lo <= l && l <= hi);
    if lambda_in_interval == Some(false) {
        warnings.push(format!(
            "seller/buyer ratio {} outside [{lo}, {hi}]",
            lambda.unwrap_or(f64::NAN)
        ));
    }

    let coarse = quantile_density_slope_bound(f, grid).max(quantile_density_slope_bound(g, grid));
    let fine =
        quantile_density_slope_bound(f, 4 * grid).max(quantile_density_slope_bound(g, 4 * grid));
    let a3_ok = coarse.is_finite() && fine <= 1.1 * coarse + 1e-9;
    if !a3_ok {
        warnings.push(format!(
            "quantile-density slope appears unbounded (grid max {coarse}, refined {fine})"
        ));
    }

    Ok(AssumptionReport {
        overlap_ok,
        a1_ok,
        a1_density_min: density_min,
        a1_density_max: density_max,
        a2_ok,
        a2_interval: (lo, hi),
        epsilon,
        lambda,
        lambda_in_interval,
        a3_ok,
        a3_bound: coarse,
        grid_size: grid,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::stats::ks_distance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> Vec<SharedDistribution> {
        vec![
            make_uniform(0.0, 1.0).unwrap(),
            make_uniform(-2.0, 3.5).unwrap(),
            make_power(2.0).unwrap(),
            make_power(0.5).unwrap(),
            make_power(3.7).unwrap(),
        ]
    }

    #[test]
    fn uniform_examples() {
        let u = make_uniform(0.0, 1.0).unwrap();
        assert_eq!(u.cdf(0.5), 0.5);
        assert_eq!(u.quantile(0.25), 0.25);
        assert!((u.tail_integral(0.5).unwrap() - 0.125).abs() < 1e-15);
        let quad = tail_integral_numeric(u.as_ref(), 0.5).unwrap();
        assert!((quad - 0.125).abs() < 1e-12);
    }

    #[test]
    fn uniform_rejects_bad_bounds() {
        assert!(matches!(
            Uniform::new(1.0, 1.0),
            Err(Error::InvalidBounds { .. })
        ));
        assert!(Uniform::new(2.0, 1.0).is_err());
    }

    #[test]
    fn power_examples() {
        let p = make_power(2.0).unwrap();
        assert_eq!(p.cdf(0.5), 0.25);
        assert_eq!(p.quantile(0.25), 0.5);
        let h = p.head_integral(0.5).unwrap();
        assert!((h - 1.0 / 24.0).abs() < 1e-15);
        let quad = head_integral_numeric(p.as_ref(), 0.5).unwrap();
        assert!((quad - 1.0 / 24.0).abs() < 1e-12);
        assert!(Power::new(0.0).is_err());
        assert!(Power::new(-1.0).is_err());
    }

    #[test]
    fn closed_form_integrals_match_quadrature() {
        for d in families() {
            let (lo, hi) = d.support();
            for i in 1..20 {
                let x = lo + (hi - lo) * i as f64 / 20.0;
                let t = d.tail_integral(x).unwrap();
                let tq = tail_integral_numeric(d.as_ref(), x).unwrap();
                assert!(
                    (t - tq).abs() <= 1e-8 * t.abs().max(1e-12),
                    "{d:?} tail at {x}"
                );
                let h = d.head_integral(x).unwrap();
                let hq = head_integral_numeric(d.as_ref(), x).unwrap();
                assert!(
                    (h - hq).abs() <= 1e-8 * h.abs().max(1e-12),
                    "{d:?} head at {x}"
                );
            }
        }
    }

    #[test]
    fn round_trip_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in families() {
            for _ in 0..100 {
                let u: f64 = rng.sample(Open01);
                assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-10, "{d:?} at {u}");
            }
            let (lo, hi) = d.support();
            let mut prev_c = -1.0;
            let mut prev_q = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let s = i as f64 / 1000.0;
                let c = d.cdf(lo + (hi - lo) * s);
                let q = d.quantile(s);
                assert!(c >= prev_c && q >= prev_q);
                prev_c = c;
                prev_q = q;
            }
            assert_eq!(d.cdf(lo), 0.0);
            assert_eq!(d.cdf(hi), 1.0);
        }
    }

    #[test]
    fn quantile_inverts_cdf_on_open_support() {
        for d in families() {
            let (lo, hi) = d.support();
            for i in 1..100 {
                let x = lo + (hi - lo) * i as f64 / 100.0;
                assert!((d.quantile(d.cdf(x)) - x).abs() < 1e-10, "{d:?} at {x}");
            }
        }
    }

    #[test]
    fn numeric_derivative_matches_closed_form() {
        let p = Power::new(3.0).unwrap();
        let wrapped = NumericOnly(Arc::new(p));
        for x in [0.1, 0.4, 0.9] {
            let exact = p.pdf_derivative(x).unwrap();
            assert!((pdf_derivative(&wrapped, x) - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let u = make_uniform(0.0, 1.0).unwrap();
        let a = sample(u.as_ref(), &mut ChaCha8Rng::seed_from_u64(42), 3);
        let b = sample(u.as_ref(), &mut ChaCha8Rng::seed_from_u64(42), 3);
        assert_eq!(a, b);
        let many = sample(u.as_ref(), &mut ChaCha8Rng::seed_from_u64(1), 10_000);
        assert!(many.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn power_sample_mean() {
        let p = make_power(2.0).unwrap();
        let n = 10_000;
        let xs = sample(p.as_ref(), &mut ChaCha8Rng::seed_from_u64(3), n);
        let mean = xs.iter().sum::<f64>() / n as f64;
        // Var X = 1/2 - 4/9 = 1/18.
        let se = (1.0 / 18.0 / n as f64).sqrt();
        assert!((mean - 2.0 / 3.0).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn sampling_law_ks() {
        let bound = 1.63 / 100.0 * 1.5;
        for (seed, d) in families().into_iter().enumerate() {
            let xs = sample(
                d.as_ref(),
                &mut ChaCha8Rng::seed_from_u64(seed as u64),
                10_000,
            );
            let ks = ks_distance(&xs, |x| d.cdf(x));
            assert!(ks < bound, "{d:?}: {ks}");
        }
    }

    #[test]
    fn assumptions_uniform_pair() {
        let u = make_uniform(0.0, 1.0).unwrap();
        let r = validate_assumptions(u.as_ref(), u.as_ref(), 0.01, 64, None).unwrap();
        assert!(r.a1_ok && r.a3_ok && r.a2_ok && r.overlap_ok);
        assert!((r.a2_interval.0 - 0.01).abs() < 1e-15);
        assert!((r.a2_interval.1 - 100.0).abs() < 1e-12);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn assumptions_flag_vanishing_density() {
        let u = make_uniform(0.0, 1.0).unwrap();
        let p = make_power(2.0).unwrap();
        let r = validate_assumptions(u.as_ref(), p.as_ref(), 0.05, 64, Some(2.0)).unwrap();
        assert!(!r.a1_ok);
        assert!(r.overlap_ok);
        assert_eq!(r.a1_density_min, 0.0);
        assert!(!r.a3_ok);
        assert_eq!(r.lambda_in_interval, Some(true));
    }

    #[test]
    fn assumptions_disjoint_supports() {
        let f = make_uniform(0.0, 1.0).unwrap();
        let g = make_uniform(2.0, 3.0).unwrap();
        let r = validate_assumptions(f.as_ref(), g.as_ref(), 0.01, 32, None).unwrap();
        assert!(!r.overlap_ok);
        assert!(!r.a1_ok);
    }

    #[test]
    fn assumptions_empty_interval() {
        let u = make_uniform(0.0, 1.0).unwrap();
        // [eps, 1/eps] is empty once eps > 1.
        let r = validate_assumptions(u.as_ref(), u.as_ref(), 2.0, 32, None).unwrap();
        assert!(!r.a2_ok);
        assert!(validate_assumptions(u.as_ref(), u.as_ref(), 0.01, 8, None).is_err());
    }

    #[test]
    fn config_parsing() {
        let c: DistributionConfig =
            serde_json::from_str(r#"{"family":"power","params":{"exponent":2}}"#).unwrap();
        assert_eq!(c.build().unwrap().descriptor(), "power(2.0)");
        let c: DistributionConfig =
            serde_json::from_str(r#"{"family":"uniform","params":{}}"#).unwrap();
        assert_eq!(c.build().unwrap().support(), (0.0, 1.0));
        assert!(serde_json::from_str::<DistributionConfig>(
            r#"{"family":"power","params":{"exponent":2,"extra":1}}"#
        )
        .is_err());
        assert!(
            serde_json::from_str::<DistributionConfig>(r#"{"family":"cauchy","params":{}}"#)
                .is_err()
        );
    }
}
