//! Normal cdf, Kolmogorov–Smirnov distances and chi-square tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use std::f64::consts::SQRT_2;

/// Standard normal distribution function, via the complementary error function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Two-sided KS distance `sup |F_n(x) - cdf(x)|` between a sample and a continuous law.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let c = cdf(x);
        d = d.max((i + 1) as f64 / n - c).max(c - i as f64 / n);
    }
    d
}

/// KS distance for integer-valued data against a continuous law discretized with a
/// half-unit continuity correction: `max_k |F_n(k) - cdf(k + 1/2)|` over the observed range.
pub fn ks_distance_lattice<F: Fn(f64) -> f64>(sample: &[i64], cdf: F) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut ks = sample.to_vec();
    ks.sort_unstable();
    let n = ks.len() as f64;
    let (min, max) = (ks[0], ks[ks.len() - 1]);
    let mut d = 0.0f64;
    let mut idx = 0usize;
    for k in (min - 1)..=max {
        while idx < ks.len() && ks[idx] <= k {
            idx += 1;
        }
        d = d.max((idx as f64 / n - cdf(k as f64 + 0.5)).abs());
    }
    d
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Survival function of the limiting Kolmogorov distribution, `P(sqrt(n) D_n > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100i32 {
        let term = (-2.0 * (k as f64).powi(2) * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic KS critical value for sample size `n` at significance `alpha`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.2f64, 5.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let law = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    law.sf(statistic)
}

/// Pearson goodness-of-fit of observed counts against probabilities. Adjacent cells
/// are pooled left to right until each expected count reaches `min_expected`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> ChiSquareTest {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(probs) {
        o += obs as f64;
        e += p * n;
        if e >= min_expected {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic = cells
        .iter()
        .filter(|(_, e)| *e > 0.0)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum::<f64>();
    let dof = cells.len().saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

/// Two-sample chi-square test of homogeneity on paired count vectors, pooling sparse
/// cells (combined count below `min_count`) into their neighbour.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_count: u64) -> ChiSquareTest {
    assert_eq!(a.len(), b.len());
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        ca += x;
        cb += y;
        if ca + cb >= min_count {
            cells.push((ca as f64, cb as f64));
            ca = 0;
            cb = 0;
        }
    }
    if ca + cb > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += ca as f64;
                last.1 += cb as f64;
            }
            None => cells.push((ca as f64, cb as f64)),
        }
    }
    let na: f64 = cells.iter().map(|c| c.0).sum();
    let nb: f64 = cells.iter().map(|c| c.1).sum();
    let n = na + nb;
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let col = x + y;
        let ea = col * na / n;
        let eb = col * nb / n;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = cells.len().saturating_sub(1);
    ChiSquareTest {
        statistic,
        dof,
        p_value: chi_square_p(statistic, dof),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_symmetry_and_center() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        for i in 0..200 {
            let x = i as f64 * 0.05;
            assert!((std_normal_cdf(-x) + std_normal_cdf(x) - 1.0).abs() < 1e-15);
        }
        assert!((std_normal_cdf(1.959963984540054) - 0.975).abs() < 1e-11);
    }

    #[test]
    fn kolmogorov_one_percent_critical() {
        // Classical asymptotic constant 1.6276.
        let c = ks_critical_value(1, 0.01);
        assert!((c - 1.62762).abs() < 1e-4, "{c}");
        let c = ks_critical_value(1, 0.05);
        assert!((c - 1.35810).abs() < 1e-4, "{c}");
    }

    #[test]
    fn ks_of_perfect_grid() {
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&xs, |x| x);
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn lattice_ks_is_zero_for_matching_discretization() {
        // A two-point law at {0, 1} with mass 1/2 each vs a cdf stepping at 1/2.
        let sample = [0i64, 1, 0, 1];
        let d = ks_distance_lattice(&sample, |x| {
            if x < 0.0 {
                0.0
            } else if x < 1.0 {
                0.5
            } else {
                1.0
            }
        });
        assert!(d < 1e-15);
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
    }

    #[test]
    fn chi_square_exact_fit() {
        let t = chi_square_gof(&[25, 50, 25], &[0.25, 0.5, 0.25], 5.0);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let t = chi_square_gof(&[900, 100], &[0.5, 0.5], 5.0);
        assert!(!t.passes(0.01));
        let t = chi_square_two_sample(&[500, 500], &[900, 100], 10);
        assert!(!t.passes(0.01));
        let t = chi_square_two_sample(&[500, 500], &[500, 500], 10);
        assert!(t.passes(0.01));
    }
}
