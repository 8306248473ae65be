//! Exact finite-market computation: order statistics, efficient quantity, welfare,
//! supporting prices and the empirical excess-demand step function.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::distributions::SharedDistribution;
use crate::error::{Error, Result};

/// A market with `n_buyers` i.i.d. valuations from `buyer_law` and `n_sellers`
/// i.i.d. costs from `seller_law`.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    pub n_buyers: usize,
    pub n_sellers: usize,
    pub buyer_law: SharedDistribution,
    pub seller_law: SharedDistribution,
}

impl MarketSpec {
    pub fn new(
        n_buyers: usize,
        n_sellers: usize,
        buyer_law: SharedDistribution,
        seller_law: SharedDistribution,
    ) -> Result<Self> {
        if n_buyers == 0 || n_sellers == 0 {
            return Err(Error::Config(format!(
                "market needs at least one buyer and one seller (got N={n_buyers}, M={n_sellers})"
            )));
        }
        Ok(Self {
            n_buyers,
            n_sellers,
            buyer_law,
            seller_law,
        })
    }

    /// Seller-to-buyer ratio `M / N`.
    pub fn lambda(&self) -> f64 {
        self.n_sellers as f64 / self.n_buyers as f64
    }

    pub fn descriptor(&self) -> String {
        format!(
            "N={};M={};F={};G={}",
            self.n_buyers,
            self.n_sellers,
            self.buyer_law.descriptor(),
            self.seller_law.descriptor()
        )
    }
}

/// One draw of buyer valuations and seller costs.
///
/// `buyer_floor` and `seller_cap` are the support endpoints `a` and `d` used by the
/// pricing conventions `V_[N+1] = a` and `C_(M+1) = d`; when absent the corresponding
/// term is dropped from the max/min.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Realization {
    pub valuations: Vec<f64>,
    pub costs: Vec<f64>,
    pub buyer_floor: Option<f64>,
    pub seller_cap: Option<f64>,
}

impl Realization {
    pub fn new(valuations: Vec<f64>, costs: Vec<f64>) -> Self {
        Self {
            valuations,
            costs,
            buyer_floor: None,
            seller_cap: None,
        }
    }

    pub fn with_support_bounds(mut self, buyer_floor: f64, seller_cap: f64) -> Self {
        self.buyer_floor = Some(buyer_floor);
        self.seller_cap = Some(seller_cap);
        self
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.valuations.is_empty() {
            return Err(Error::EmptyInput("no buyer valuations"));
        }
        if self.costs.is_empty() {
            return Err(Error::EmptyInput("no seller costs"));
        }
        Ok(())
    }

    pub fn lambda(&self) -> f64 {
        self.costs.len() as f64 / self.valuations.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficientOutcome {
    pub quantity: usize,
    pub welfare: f64,
    /// `max{C_(K), V_[K+1]}`; `None` when nothing trades.
    pub buyer_price: Option<f64>,
    /// `min{C_(K+1), V_[K]}`; `None` when nothing trades.
    pub seller_price: Option<f64>,
}

impl EfficientOutcome {
    /// Intermediary's deficit per trade, `seller_price - buyer_price`.
    pub fn budget_deficit(&self) -> Option<f64> {
        Some((self.seller_price? - self.buyer_price?) * self.quantity as f64)
    }
}

/// Order statistics of a realization with the input indices they came from.
/// Ties keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedMarket {
    /// `V_[1] >= V_[2] >= ...`
    pub values_desc: Vec<f64>,
    /// `C_(1) <= C_(2) <= ...`
    pub costs_asc: Vec<f64>,
    pub buyer_rank_to_index: Vec<usize>,
    pub seller_rank_to_index: Vec<usize>,
}

impl OrderedMarket {
    pub fn from_realization(r: &Realization) -> Result<Self> {
        r.check_nonempty()?;
        let mut b: Vec<usize> = (0..r.valuations.len()).collect();
        b.sort_by(|&i, &j| r.valuations[j].total_cmp(&r.valuations[i]));
        let mut s: Vec<usize> = (0..r.costs.len()).collect();
        s.sort_by(|&i, &j| r.costs[i].total_cmp(&r.costs[j]));
        Ok(Self {
            values_desc: b.iter().map(|&i| r.valuations[i]).collect(),
            costs_asc: s.iter().map(|&i| r.costs[i]).collect(),
            buyer_rank_to_index: b,
            seller_rank_to_index: s,
        })
    }

    /// Number of ranks `k <= N ∧ M` with `V_[k] - C_(k) >= 0`. The marginal gains are
    /// nonincreasing in `k`, so this is also the length of the nonnegative prefix.
    pub fn quantity(&self) -> usize {
        self.values_desc
            .iter()
            .zip(&self.costs_asc)
            .filter(|(v, c)| **v - **c >= 0.0)
            .count()
    }
}

/// Efficient allocation together with the trading ranks' input indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub outcome: EfficientOutcome,
    pub trading_buyers: Vec<usize>,
    pub trading_sellers: Vec<usize>,
}

pub fn efficient_allocation(r: &Realization) -> Result<Allocation> {
    let om = OrderedMarket::from_realization(r)?;
    let k = om.quantity();
    let welfare = (0..k)
        .map(|i| om.values_desc[i] - om.costs_asc[i])
        .sum::<f64>();
    let (buyer_price, seller_price) = if k == 0 {
        (None, None)
    } else {
        let next_value = om.values_desc.get(k).copied().or(r.buyer_floor);
        let next_cost = om.costs_asc.get(k).copied().or(r.seller_cap);
        let c_k = om.costs_asc[k - 1];
        let v_k = om.values_desc[k - 1];
        (
            Some(next_value.map_or(c_k, |v| c_k.max(v))),
            Some(next_cost.map_or(v_k, |c| v_k.min(c))),
        )
    };
    Ok(Allocation {
        outcome: EfficientOutcome {
            quantity: k,
            welfare,
            buyer_price,
            seller_price,
        },
        trading_buyers: om.buyer_rank_to_index[..k].to_vec(),
        trading_sellers: om.seller_rank_to_index[..k].to_vec(),
    })
}

/// Efficient quantity, welfare and supporting prices for one realization.
pub fn efficient_outcome(r: &Realization) -> Result<EfficientOutcome> {
    efficient_allocation(r).map(|a| a.outcome)
}

/// The arg-max form of the efficient quantity: the largest `k` maximizing the partial
/// sums `Σ_{i<=k} (V_[i] - C_(i))`.
pub fn efficient_quantity_argmax(r: &Realization) -> Result<usize> {
    let om = OrderedMarket::from_realization(r)?;
    let mut best_k = 0;
    let mut best = 0.0;
    let mut partial = 0.0;
    for (k, (v, c)) in om.values_desc.iter().zip(&om.costs_asc).enumerate() {
        partial += v - c;
        if partial >= best {
            best = partial;
            best_k = k + 1;
        }
    }
    Ok(best_k)
}

/// Empirical excess demand `V_N(1 - t) - C_M(min(t/λ, 1))` built from the empirical
/// quantile functions with left-closed steps.
pub fn empirical_excess(r: &Realization, t: f64) -> Result<f64> {
    let om = OrderedMarket::from_realization(r)?;
    empirical_excess_ordered(&om, t)
}

pub fn empirical_excess_ordered(om: &OrderedMarket, t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfDomain {
            value: t,
            domain: "[0, 1]".into(),
        });
    }
    let n = om.values_desc.len();
    let m = om.costs_asc.len();
    // V_N(1 - t) = V_[j] for (j-1)/N <= t < j/N.
    let j = ((t * n as f64).floor() as usize + 1).min(n);
    // C_M(s) = C_(i) for (i-1)/M < s <= i/M, with s*M = min(tN, M).
    let s_m = (t * n as f64).min(m as f64);
    let i = (s_m.ceil() as usize).clamp(1, m);
    Ok(om.values_desc[j - 1] - om.costs_asc[i - 1])
}

/// Welfare twice: by summation, and as `N ∫_0^{K/N} E_N(t) dt` integrated exactly over
/// the steps of the empirical excess function.
pub fn welfare_integral_check(r: &Realization) -> Result<(f64, f64)> {
    let om = OrderedMarket::from_realization(r)?;
    let k = om.quantity();
    let w = (0..k)
        .map(|i| om.values_desc[i] - om.costs_asc[i])
        .sum::<f64>();
    if k == 0 {
        return Ok((w, 0.0));
    }
    let n = om.values_desc.len();
    let m = om.costs_asc.len();
    let upper = k as f64 / n as f64;
    let lambda = m as f64 / n as f64;

    let mut breaks: Vec<f64> = (0..=k).map(|j| j as f64 / n as f64).collect();
    breaks.extend(
        (1..=m)
            .map(|i| i as f64 * lambda / m as f64)
            .take_while(|&t| t < upper),
    );
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut area = 0.0;
    for seg in breaks.windows(2) {
        let width = seg[1] - seg[0];
        if width <= 0.0 {
            continue;
        }
        area += width * empirical_excess_ordered(&om, 0.5 * (seg[0] + seg[1]))?;
    }
    Ok((w, n as f64 * area))
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    role: String,
    value: f64,
}

/// Writes a realization as `role,value` rows, `B` for buyers and `S` for sellers.
/// Values use 17 significant digits.
pub fn write_realization_csv<W: Write>(r: &Realization, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["role", "value"])?;
    for v in &r.valuations {
        w.write_record(["B", &crate::output::fmt_f64(*v)])?;
    }
    for c in &r.costs {
        w.write_record(["S", &crate::output::fmt_f64(*c)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_realization_csv<R: Read>(input: R) -> Result<Realization> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut r = Realization::default();
    for row in rdr.deserialize() {
        let row: CsvRow = row?;
        match row.role.as_str() {
            "B" => r.valuations.push(row.value),
            "S" => r.costs.push(row.value),
            other => return Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(v: &[f64], c: &[f64]) -> Realization {
        Realization::new(v.to_vec(), c.to_vec())
    }

    /// Maximum of `Σ V - Σ C` over all equal-size buyer/seller subsets.
    fn brute_force_welfare(v: &[f64], c: &[f64]) -> f64 {
        let mut best = 0.0f64;
        for bm in 0u32..(1 << v.len()) {
            for sm in 0u32..(1 << c.len()) {
                if bm.count_ones() != sm.count_ones() {
                    continue;
                }
                let sv: f64 = (0..v.len())
                    .filter(|i| bm >> i & 1 == 1)
                    .map(|i| v[i])
                    .sum();
                let sc: f64 = (0..c.len())
                    .filter(|i| sm >> i & 1 == 1)
                    .map(|i| c[i])
                    .sum();
                best = best.max(sv - sc);
            }
        }
        best
    }

    #[test]
    fn single_pair() {
        let o = efficient_outcome(&r(&[0.9], &[0.1])).unwrap();
        assert_eq!(o.quantity, 1);
        assert!((o.welfare - 0.8).abs() < 1e-15);
    }

    #[test]
    fn three_by_three() {
        let o = efficient_outcome(&r(&[0.3, 0.9, 0.6], &[0.8, 0.2, 0.5])).unwrap();
        assert_eq!(o.quantity, 2);
        assert!((o.welfare - 0.8).abs() < 1e-15);
        assert_eq!(o.buyer_price, Some(0.5));
        assert_eq!(o.seller_price, Some(0.6));
        assert!((o.budget_deficit().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn no_trade() {
        let o = efficient_outcome(&r(&[0.1, 0.2], &[0.8, 0.9])).unwrap();
        assert_eq!(o.quantity, 0);
        assert_eq!(o.welfare, 0.0);
        assert_eq!(o.buyer_price, None);
        assert_eq!(o.seller_price, None);
    }

    #[test]
    fn empty_input() {
        assert!(matches!(
            efficient_outcome(&r(&[], &[0.1])),
            Err(Error::EmptyInput(_))
        ));
        assert!(efficient_quantity_argmax(&r(&[0.1], &[])).is_err());
    }

    #[test]
    fn support_conventions_for_prices() {
        // Every buyer trades, so V_[N+1] = a enters the buyer price.
        let real = r(&[0.9], &[0.1, 0.95]).with_support_bounds(0.3, 1.0);
        let o = efficient_outcome(&real).unwrap();
        assert_eq!(o.buyer_price, Some(0.3));
        assert_eq!(o.seller_price, Some(0.9));
        // Every seller trades, so C_(M+1) = d enters the seller price.
        let real = r(&[0.9, 0.05], &[0.1]).with_support_bounds(0.0, 0.7);
        let o = efficient_outcome(&real).unwrap();
        assert_eq!(o.buyer_price, Some(0.1));
        assert_eq!(o.seller_price, Some(0.7));
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(
            efficient_quantity_argmax(&r(&[0.9, 0.6, 0.3], &[0.2, 0.5, 0.8])).unwrap(),
            2
        );
        assert_eq!(efficient_quantity_argmax(&r(&[0.5], &[0.5])).unwrap(), 1);
        assert_eq!(efficient_outcome(&r(&[0.5], &[0.5])).unwrap().quantity, 1);
    }

    #[test]
    fn empirical_excess_examples() {
        let real = r(&[0.9, 0.6, 0.3], &[0.2, 0.5, 0.8]);
        assert!((empirical_excess(&real, 0.1).unwrap() - 0.7).abs() < 1e-15);
        assert!((empirical_excess(&real, 0.0).unwrap() - 0.7).abs() < 1e-15);
        assert!((empirical_excess(&real, 1.0).unwrap() - (0.3 - 0.8)).abs() < 1e-15);
        assert!((empirical_excess(&real, 0.5).unwrap() - (0.6 - 0.5)).abs() < 1e-15);
        assert!(empirical_excess(&real, 1.5).is_err());
    }

    #[test]
    fn empirical_excess_unbalanced() {
        // N = 2, M = 4, λ = 2: the seller curve only reaches C_(2) by t = 1.
        let real = r(&[0.9, 0.4], &[0.1, 0.2, 0.3, 0.35]);
        assert!((empirical_excess(&real, 0.2).unwrap() - (0.9 - 0.1)).abs() < 1e-15);
        assert!((empirical_excess(&real, 0.75).unwrap() - (0.4 - 0.2)).abs() < 1e-15);
    }

    #[test]
    fn welfare_integral_examples() {
        let (w, i) = welfare_integral_check(&r(&[0.9, 0.6, 0.3], &[0.2, 0.5, 0.8])).unwrap();
        assert!((w - 0.8).abs() < 1e-15);
        assert!((i - 0.8).abs() < 1e-12);
        let (w, i) = welfare_integral_check(&r(&[0.1, 0.2], &[0.8, 0.9])).unwrap();
        assert_eq!((w, i), (0.0, 0.0));
    }

    #[test]
    fn brute_force_small_markets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let c: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let o = efficient_outcome(&r(&v, &c)).unwrap();
            assert!((o.welfare - brute_force_welfare(&v, &c)).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_are_stable() {
        let a = efficient_allocation(&r(&[0.5, 0.5, 0.5], &[0.4, 0.4])).unwrap();
        assert_eq!(a.trading_buyers, vec![0, 1]);
        assert_eq!(a.trading_sellers, vec![0, 1]);
    }

    #[test]
    fn csv_round_trip() {
        let real = r(&[0.1, 1.0 / 3.0], &[0.7]);
        let mut buf = Vec::new();
        write_realization_csv(&real, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("role,value\nB,"));
        assert_eq!(read_realization_csv(buf.as_slice()).unwrap(), real);
        assert!(read_realization_csv("role,value\nX,1.0\n".as_bytes()).is_err());
    }

    fn market() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(0.0f64..1.0, 1..20),
            prop::collection::vec(0.0f64..1.0, 1..20),
        )
    }

    proptest! {
        #[test]
        fn argmax_equals_cardinality((v, c) in market()) {
            let real = r(&v, &c);
            prop_assert_eq!(
                efficient_quantity_argmax(&real).unwrap(),
                efficient_outcome(&real).unwrap().quantity
            );
        }

        #[test]
        fn welfare_identity((v, c) in market()) {
            let (w, i) = welfare_integral_check(&r(&v, &c)).unwrap();
            prop_assert!((w - i).abs() <= 1e-12, "{} vs {}", w, i);
        }

        #[test]
        fn prices_and_invariants((v, c) in market()) {
            let o = efficient_outcome(&r(&v, &c)).unwrap();
            prop_assert!(o.quantity <= v.len().min(c.len()));
            prop_assert!(o.welfare >= 0.0);
            if o.quantity >= 1 {
                let om = OrderedMarket::from_realization(&r(&v, &c)).unwrap();
                let (bp, sp) = (o.buyer_price.unwrap(), o.seller_price.unwrap());
                prop_assert!(bp <= sp);
                prop_assert!(bp <= om.values_desc[o.quantity - 1]);
                prop_assert!(sp >= om.costs_asc[o.quantity - 1]);
            }
        }

        #[test]
        fn low_buyer_is_irrelevant((v, c) in market()) {
            let base = efficient_outcome(&r(&v, &c)).unwrap();
            let floor = c.iter().cloned().fold(f64::INFINITY, f64::min) - 0.5;
            let mut v2 = v.clone();
            v2.push(floor);
            let more = efficient_outcome(&r(&v2, &c)).unwrap();
            prop_assert_eq!(base.quantity, more.quantity);
            prop_assert_eq!(base.welfare, more.welfare);
        }

        #[test]
        fn quantity_depends_only_on_order((v, c) in market()) {
            let base = efficient_outcome(&r(&v, &c)).unwrap().quantity;
            let warp = |x: &f64| (3.0 * x).exp() + x.powi(3);
            let tv: Vec<f64> = v.iter().map(warp).collect();
            let tc: Vec<f64> = c.iter().map(warp).collect();
            prop_assert_eq!(base, efficient_outcome(&r(&tv, &tc)).unwrap().quantity);
        }
    }
}
