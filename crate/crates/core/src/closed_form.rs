//! The equal-laws case: closed-form approximation parameters for uniform valuations
//! and costs, and the exact (distribution-free) hypergeometric law of the efficient
//! quantity.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::numeric::std_normal_cdf;

/// Per-buyer approximation parameters for `F = G = U(0,1)` at ratio `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormParams {
    pub t_alpha: f64,
    pub sigma2: f64,
    pub mean_w_unit: f64,
    pub varsigma2: f64,
    pub kappa: f64,
}

impl ClosedFormParams {
    /// `√(3 / (λ⁻¹ + 3 + λ))`
    pub fn correlation(&self) -> f64 {
        self.kappa / (self.sigma2 * self.varsigma2).sqrt()
    }
}

pub fn closed_form_params(lambda: f64) -> Result<ClosedFormParams> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be positive and finite",
        });
    }
    let l = lambda;
    let p = 1.0 + l;
    let p3 = p * p * p;
    Ok(ClosedFormParams {
        t_alpha: l / p,
        sigma2: l * l / p3,
        mean_w_unit: l / (2.0 * p),
        varsigma2: l * (1.0 + 3.0 * l + l * l) / (12.0 * p3),
        kappa: l * l / (2.0 * p3),
    })
}

/// Law of the efficient quantity when buyers and sellers share one continuous law:
/// `P(K = k) = C(N, k) C(M, M - k) / C(N + M, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypergeometricLaw {
    pub n_buyers: u64,
    pub n_sellers: u64,
}

/// Largest `N + M` for which the `u128` rational path is exact.
pub const EXACT_LIMIT: u64 = 60;

impl HypergeometricLaw {
    pub fn new(n_buyers: u64, n_sellers: u64) -> Result<Self> {
        if n_buyers == 0 || n_sellers == 0 {
            return Err(Error::Config(format!(
                "hypergeometric law needs N, M >= 1 (got N={n_buyers}, M={n_sellers})"
            )));
        }
        Ok(Self {
            n_buyers,
            n_sellers,
        })
    }

    pub fn max_k(&self) -> u64 {
        self.n_buyers.min(self.n_sellers)
    }

    pub fn mean(&self) -> f64 {
        let (n, m) = (self.n_buyers as f64, self.n_sellers as f64);
        n * m / (n + m)
    }

    pub fn variance(&self) -> f64 {
        let (n, m) = (self.n_buyers as f64, self.n_sellers as f64);
        let t = n + m;
        n * m * n * m / (t * t * (t - 1.0)).max(f64::MIN_POSITIVE)
    }

    /// Probability of `k` trades. Out-of-range `k` has probability zero.
    pub fn pmf(&self, k: u64) -> f64 {
        if k > self.max_k() {
            return 0.0;
        }
        self.pmf_table()[k as usize]
    }

    /// Unnormalized log weights `ln C(N,k) + ln C(M,k)` are accumulated from the
    /// ratio of consecutive terms, then normalized, so the table sums to one up to
    /// rounding.
    pub fn pmf_table(&self) -> Vec<f64> {
        let (n, m) = (self.n_buyers as f64, self.n_sellers as f64);
        let mut logs = Vec::with_capacity(self.max_k() as usize + 1);
        let mut acc = 0.0f64;
        logs.push(acc);
        for k in 0..self.max_k() {
            let k = k as f64;
            acc += ((n - k) * (m - k)).ln() - 2.0 * (k + 1.0).ln();
            logs.push(acc);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    /// `ln P(K = k)` from log-gamma binomials.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        let (n, m) = (self.n_buyers, self.n_sellers);
        if k > self.max_k() {
            return f64::NEG_INFINITY;
        }
        ln_binomial(n, k) + ln_binomial(m, m - k) - ln_binomial(n + m, m)
    }

    /// Exact rational probability; `None` when `N + M` exceeds [`EXACT_LIMIT`].
    pub fn pmf_exact(&self, k: u64) -> Option<Ratio<u128>> {
        let (n, m) = (self.n_buyers, self.n_sellers);
        if n + m > EXACT_LIMIT {
            return None;
        }
        if k > self.max_k() {
            return Some(Ratio::from_integer(0));
        }
        Some(Ratio::new(
            binomial_u128(n, k) * binomial_u128(m, m - k),
            binomial_u128(n + m, m),
        ))
    }

    pub fn cdf_table(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.pmf_table()
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect()
    }
}

/// `C(n, k)` exactly; each partial product is itself a binomial coefficient, so the
/// division is exact.
pub fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

pub fn hypergeometric_pmf(law: &HypergeometricLaw, k: u64) -> f64 {
    law.pmf(k)
}

/// `sup_x |P((K - N t*)/(σ √N) <= x) - Φ(x)|` with `t*` and `σ²` from the closed-form
/// parameters at `λ = M/N`, evaluated on both sides of every jump of the cdf.
pub fn distance_to_normal(law: &HypergeometricLaw) -> f64 {
    let n = law.n_buyers as f64;
    let lambda = law.n_sellers as f64 / n;
    let p = closed_form_params(lambda).expect("positive ratio");
    let scale = (p.sigma2 * n).sqrt();
    let mut below = 0.0;
    let mut sup = 0.0f64;
    for (k, above) in law.cdf_table().into_iter().enumerate() {
        let phi = std_normal_cdf((k as f64 - n * p.t_alpha) / scale);
        sup = sup.max((below - phi).abs()).max((above - phi).abs());
        below = above;
    }
    sup
}
