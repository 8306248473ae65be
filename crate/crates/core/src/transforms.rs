//! Monotone transforms of valuations and costs.
//!
//! A mechanism that runs the efficient allocation on `B(V_i)` and `S(C_j)` for
//! nondecreasing `B`, `S` is analysed through the pushforward laws `F∘B⁻¹` and
//! `G∘S⁻¹`. The virtual-value maps give the profit-maximizing mechanism.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distributions::{pdf_derivative, Distribution, SharedDistribution};
use crate::error::{Error, Result};
use crate::market::{efficient_allocation, EfficientOutcome, Realization};
use crate::numeric::{central_difference, integrate, invert_monotone};

/// Inversion tolerance for maps without a closed-form inverse.
pub const INVERSION_TOL: f64 = 1e-12;
pub const CHECK_GRID: usize = 1000;

/// A nondecreasing real map on `domain()`.
pub trait MonotoneMap: fmt::Debug + Send + Sync {
    fn apply(&self, x: f64) -> f64;

    fn domain(&self) -> (f64, f64);

    /// Generalized inverse: smallest `x` in the domain with `apply(x) >= y`.
    fn inverse(&self, y: f64) -> f64 {
        let (lo, hi) = self.domain();
        invert_monotone(|x| self.apply(x), y, lo, hi, INVERSION_TOL)
    }

    fn derivative(&self, x: f64) -> f64 {
        central_difference(|y| self.apply(y), x)
    }

    fn descriptor(&self) -> String;
}

pub type SharedMap = Arc<dyn MonotoneMap>;

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl MonotoneMap for Identity {
    fn apply(&self, x: f64) -> f64 {
        x
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn inverse(&self, y: f64) -> f64 {
        y
    }
    fn derivative(&self, _x: f64) -> f64 {
        1.0
    }
    fn descriptor(&self) -> String {
        "identity".into()
    }
}

/// `x ↦ scale * x + shift` with `scale >= 0`.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    scale: f64,
    shift: f64,
}

impl Affine {
    pub fn new(scale: f64, shift: f64) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::NonMonotone(format!("affine map with scale {scale}")));
        }
        Ok(Self { scale, shift })
    }
}

impl MonotoneMap for Affine {
    fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn inverse(&self, y: f64) -> f64 {
        (y - self.shift) / self.scale
    }
    fn derivative(&self, _x: f64) -> f64 {
        self.scale
    }
    fn descriptor(&self) -> String {
        format!("affine({:?},{:?})", self.scale, self.shift)
    }
}

/// Buyer virtual value `B(x) = x - (1 - F(x)) / f(x)`.
#[derive(Debug, Clone)]
pub struct BuyerVirtualValue {
    law: SharedDistribution,
}

impl MonotoneMap for BuyerVirtualValue {
    fn apply(&self, x: f64) -> f64 {
        x - (1.0 - self.law.cdf(x)) / self.law.pdf(x)
    }
    fn domain(&self) -> (f64, f64) {
        self.law.support()
    }
    fn derivative(&self, x: f64) -> f64 {
        let f = self.law.pdf(x);
        2.0 + (1.0 - self.law.cdf(x)) * pdf_derivative(self.law.as_ref(), x) / (f * f)
    }
    fn descriptor(&self) -> String {
        format!("buyer_virtual_value({})", self.law.descriptor())
    }
}

/// Seller virtual cost `S(y) = y + G(y) / g(y)`.
#[derive(Debug, Clone)]
pub struct SellerVirtualValue {
    law: SharedDistribution,
}

impl MonotoneMap for SellerVirtualValue {
    fn apply(&self, y: f64) -> f64 {
        y + self.law.cdf(y) / self.law.pdf(y)
    }
    fn domain(&self) -> (f64, f64) {
        self.law.support()
    }
    fn derivative(&self, y: f64) -> f64 {
        let g = self.law.pdf(y);
        2.0 - self.law.cdf(y) * pdf_derivative(self.law.as_ref(), y) / (g * g)
    }
    fn descriptor(&self) -> String {
        format!("seller_virtual_value({})", self.law.descriptor())
    }
}

/// Piecewise-linear interpolation through knots `(x_i, y_i)` with strictly increasing
/// `x` and nondecreasing `y`; constant beyond the end knots.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::Config(
                "a knot table needs at least two knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(format!(
                    "knot abscissae must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::NonMonotone(format!(
                    "knot values decrease from {} to {}",
                    w[0].1, w[1].1
                )));
            }
        }
        Ok(Self { knots })
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.knots.partition_point(|k| k.0 <= x);
        i.clamp(1, self.knots.len() - 1) - 1
    }
}

impl MonotoneMap for PiecewiseLinear {
    fn apply(&self, x: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        let i = self.segment(x);
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
    fn domain(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }
    fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, y0) = self.knots[i];
        let (x1, y1) = self.knots[i + 1];
        (y1 - y0) / (x1 - x0)
    }
    fn descriptor(&self) -> String {
        let parts: Vec<String> = self
            .knots
            .iter()
            .map(|(x, y)| format!("{x:?}:{y:?}"))
            .collect();
        format!("knots({})", parts.join(","))
    }
}

/// Buyer map `B` and seller map `S`.
#[derive(Debug, Clone)]
pub struct TransformPair {
    pub buyer_map: SharedMap,
    pub seller_map: SharedMap,
}

impl TransformPair {
    pub fn new(buyer_map: SharedMap, seller_map: SharedMap) -> Self {
        Self {
            buyer_map,
            seller_map,
        }
    }

    pub fn identity() -> Self {
        Self::new(Arc::new(Identity), Arc::new(Identity))
    }

    pub fn descriptor(&self) -> String {
        format!(
            "B={};S={}",
            self.buyer_map.descriptor(),
            self.seller_map.descriptor()
        )
    }
}

/// Monotonicity and inversion quality of a map on a grid of `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapCheck {
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
    pub max_round_trip_error: f64,
}

impl MapCheck {
    pub fn ok(&self) -> bool {
        self.nondecreasing && self.max_round_trip_error < 1e-10
    }
}

/// Evaluates `map` on `CHECK_GRID` interior points of `[lo, hi]`. The round-trip
/// error `|inverse(apply(x)) - x|` is only meaningful where the map is strictly
/// increasing; flat stretches are skipped.
pub fn check_map(map: &dyn MonotoneMap, lo: f64, hi: f64) -> MapCheck {
    let xs: Vec<f64> = (1..=CHECK_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (CHECK_GRID + 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| map.apply(x)).collect();
    let nondecreasing = ys.windows(2).all(|w| w[1] >= w[0]);
    let strictly_increasing = ys.windows(2).all(|w| w[1] > w[0]);
    let mut max_err = 0.0f64;
    for i in 0..xs.len() {
        let flat_left = i > 0 && ys[i - 1] >= ys[i];
        let flat_right = i + 1 < ys.len() && ys[i + 1] <= ys[i];
        if flat_left || flat_right {
            continue;
        }
        max_err = max_err.max((map.inverse(ys[i]) - xs[i]).abs());
    }
    MapCheck {
        nondecreasing,
        strictly_increasing,
        max_round_trip_error: if nondecreasing {
            max_err
        } else {
            f64::INFINITY
        },
    }
}

/// Efficient outcome computed on transformed values.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedOutcome {
    /// Quantity, welfare and prices in transformed units.
    pub outcome: EfficientOutcome,
    pub trading_buyers: Vec<usize>,
    pub trading_sellers: Vec<usize>,
    /// `Σ V - Σ C` over the trading agents, in original units.
    pub original_welfare: f64,
}

fn check_domain(map: &dyn MonotoneMap, x: f64, who: &str) -> Result<()> {
    let (lo, hi) = map.domain();
    if x < lo || x > hi || x.is_nan() {
        return Err(Error::OutOfDomain {
            value: x,
            domain: format!("{who} map domain [{lo}, {hi}]"),
        });
    }
    Ok(())
}

pub fn transformed_outcome(r: &Realization, tp: &TransformPair) -> Result<TransformedOutcome> {
    let mut tv = Vec::with_capacity(r.valuations.len());
    for &v in &r.valuations {
        check_domain(tp.buyer_map.as_ref(), v, "buyer")?;
        tv.push(tp.buyer_map.apply(v));
    }
    let mut tc = Vec::with_capacity(r.costs.len());
    for &c in &r.costs {
        check_domain(tp.seller_map.as_ref(), c, "seller")?;
        tc.push(tp.seller_map.apply(c));
    }
    let mut transformed = Realization::new(tv, tc);
    transformed.buyer_floor = r.buyer_floor.map(|a| tp.buyer_map.apply(a));
    transformed.seller_cap = r.seller_cap.map(|d| tp.seller_map.apply(d));
    let alloc = efficient_allocation(&transformed)?;
    let original_welfare = alloc
        .trading_buyers
        .iter()
        .map(|&i| r.valuations[i])
        .sum::<f64>()
        - alloc
            .trading_sellers
            .iter()
            .map(|&j| r.costs[j])
            .sum::<f64>();
    Ok(TransformedOutcome {
        outcome: alloc.outcome,
        trading_buyers: alloc.trading_buyers,
        trading_sellers: alloc.trading_sellers,
        original_welfare,
    })
}

/// Virtual-value maps plus regularity flags. A map that fails the monotonicity check
/// marks its law as irregular; no ironing is attempted.
#[derive(Debug, Clone)]
pub struct VirtualValueTransforms {
    pub pair: TransformPair,
    pub buyer_check: MapCheck,
    pub seller_check: MapCheck,
}

impl VirtualValueTransforms {
    pub fn regular(&self) -> bool {
        self.buyer_check.ok() && self.seller_check.ok()
    }
}

pub fn virtual_value_transforms(
    f: &SharedDistribution,
    g: &SharedDistribution,
) -> VirtualValueTransforms {
    let buyer = BuyerVirtualValue { law: f.clone() };
    let seller = SellerVirtualValue { law: g.clone() };
    let (a, b) = f.support();
    let (c, d) = g.support();
    let buyer_check = check_map(&buyer, a, b);
    let seller_check = check_map(&seller, c, d);
    VirtualValueTransforms {
        pair: TransformPair::new(Arc::new(buyer), Arc::new(seller)),
        buyer_check,
        seller_check,
    }
}

/// Pushforward of `base` through a strictly increasing `map`.
#[derive(Debug, Clone)]
pub struct CompositeDistribution {
    base: SharedDistribution,
    map: SharedMap,
}

impl CompositeDistribution {
    fn integral_of_pdf_times_map(&self, lo: f64, hi: f64) -> Option<f64> {
        integrate(|s| self.base.pdf(s) * self.map.apply(s), lo, hi).ok()
    }
}

impl Distribution for CompositeDistribution {
    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.support();
        (self.map.apply(lo), self.map.apply(hi))
    }

    fn cdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return 1.0;
        }
        self.base.cdf(self.map.inverse(y))
    }

    fn quantile(&self, u: f64) -> f64 {
        self.map.apply(self.base.quantile(u))
    }

    fn pdf(&self, y: f64) -> f64 {
        let (lo, hi) = self.support();
        if y < lo || y > hi {
            return 0.0;
        }
        let x = self.map.inverse(y);
        self.base.pdf(x) / self.map.derivative(x)
    }

    fn pdf_at_quantile(&self, u: f64) -> f64 {
        let x = self.base.quantile(u);
        self.base.pdf(x) / self.map.derivative(x)
    }

    /// `∫_x^b (1 - F) map' = -(1 - F(x)) map(x) + ∫_x^b f map`, with `x = map⁻¹(y)`.
    fn tail_integral(&self, y: f64) -> Option<f64> {
        let (_, b) = self.base.support();
        let x = self.map.inverse(y).min(b);
        let rest = self.integral_of_pdf_times_map(x, b)?;
        Some(rest - (1.0 - self.base.cdf(x)) * self.map.apply(x))
    }

    /// `∫_a^x F map' = F(x) map(x) - ∫_a^x f map`, with `x = map⁻¹(y)`.
    fn head_integral(&self, y: f64) -> Option<f64> {
        let (a, _) = self.base.support();
        let x = self.map.inverse(y).max(a);
        let rest = self.integral_of_pdf_times_map(a, x)?;
        Some(self.base.cdf(x) * self.map.apply(x) - rest)
    }

    fn descriptor(&self) -> String {
        format!("{}∘{}⁻¹", self.base.descriptor(), self.map.descriptor())
    }
}

/// Builds `base ∘ map⁻¹`. The map must be strictly increasing on the base support.
pub fn composite_distribution(
    base: SharedDistribution,
    map: SharedMap,
) -> Result<SharedDistribution> {
    let (lo, hi) = base.support();
    let check = check_map(map.as_ref(), lo, hi);
    let ends_ok = map.apply(lo) < map.apply(hi);
    if !check.strictly_increasing || !ends_ok {
        return Err(Error::NonMonotone(format!(
            "{} is not strictly increasing on [{lo}, {hi}]",
            map.descriptor()
        )));
    }
    Ok(Arc::new(CompositeDistribution { base, map }))
}

/// JSON form: `"identity"`, `"virtual_values"` or `{"custom": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformConfig {
    Identity,
    VirtualValues,
    Custom(CustomKnots),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomKnots {
    pub buyer_knots: Vec<(f64, f64)>,
    pub seller_knots: Vec<(f64, f64)>,
}

impl TransformConfig {
    pub fn build(&self, f: &SharedDistribution, g: &SharedDistribution) -> Result<TransformPair> {
        match self {
            TransformConfig::Identity => Ok(TransformPair::identity()),
            TransformConfig::VirtualValues => {
                let vv = virtual_value_transforms(f, g);
                if !vv.regular() {
                    return Err(Error::NonMonotone(
                        "virtual-value maps are not monotone for these laws (irregular)".into(),
                    ));
                }
                Ok(vv.pair)
            }
            TransformConfig::Custom(k) => Ok(TransformPair::new(
                Arc::new(PiecewiseLinear::new(k.buyer_knots.clone())?),
                Arc::new(PiecewiseLinear::new(k.seller_knots.clone())?),
            )),
        }
    }
}

/// Pushforward laws `(F∘B⁻¹, G∘S⁻¹)`.
pub fn composite_laws(
    f: &SharedDistribution,
    g: &SharedDistribution,
    tp: &TransformPair,
) -> Result<(SharedDistribution, SharedDistribution)> {
    Ok((
        composite_distribution(f.clone(), tp.buyer_map.clone())?,
        composite_distribution(g.clone(), tp.seller_map.clone())?,
    ))
}
