//! Seeded Monte Carlo of `(K, W)` and ellipsoidal quantiles.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::asymptotics::{gaussian_approx, GaussianApprox};
use crate::distributions::sample;
use crate::error::{Error, Result};
use crate::market::{efficient_outcome, MarketSpec, Realization};
use crate::numeric::stats::{ks_critical_value, ks_distance, ks_distance_lattice};
use crate::numeric::std_normal_cdf;
use crate::output::fmt_f64;
use crate::transforms::{composite_laws, transformed_outcome, TransformPair};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const DEFAULT_LEVELS: [f64; 3] = [0.25, 0.5, 0.95];
pub const ELLIPSE_POINTS: usize = 256;
pub const MIN_DIAGNOSTIC_REPLICATIONS: usize = 100;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub spec: MarketSpec,
    pub replications: usize,
    pub master_seed: u64,
    pub transform: Option<TransformPair>,
}

impl SimulationConfig {
    pub fn new(spec: MarketSpec, replications: usize, master_seed: u64) -> Result<Self> {
        if replications == 0 {
            return Err(Error::InvalidParameter {
                name: "replications",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(Self {
            spec,
            replications,
            master_seed,
            transform: None,
        })
    }

    pub fn with_transform(mut self, tp: TransformPair) -> Self {
        self.transform = Some(tp);
        self
    }

    pub fn descriptor(&self) -> String {
        let tp = self
            .transform
            .as_ref()
            .map_or_else(|| "none".to_string(), TransformPair::descriptor);
        format!(
            "{};reps={};seed={};transform={}",
            self.spec.descriptor(),
            self.replications,
            self.master_seed,
            tp
        )
    }

    /// Hex SHA-256 of [`SimulationConfig::descriptor`].
    pub fn digest(&self) -> String {
        format!("{:x}", Sha256::digest(self.descriptor().as_bytes()))
    }

    /// Approximation for the simulated quantities: the pushforward laws when a
    /// transform is set, the base laws otherwise.
    pub fn approx(&self) -> Result<GaussianApprox> {
        match &self.transform {
            None => gaussian_approx(&self.spec),
            Some(tp) => {
                let (fb, gs) = composite_laws(&self.spec.buyer_law, &self.spec.seller_law, tp)?;
                gaussian_approx(&MarketSpec::new(
                    self.spec.n_buyers,
                    self.spec.n_sellers,
                    fb,
                    gs,
                )?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub replication: usize,
    pub quantity: usize,
    pub welfare: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub records: Vec<Record>,
    /// `((K - N t) / √N, (W - N ∫E) / √N)` per replication.
    pub standardized_records: Vec<Vec2>,
    pub empirical_mean: Vec2,
    pub empirical_cov: Mat2,
    pub approx: GaussianApprox,
    pub seed: u64,
    pub config_digest: String,
}

/// Generator for replication `index`: stream `index` of the master seed.
pub fn replication_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

pub fn draw_realization(spec: &MarketSpec, master_seed: u64, index: usize) -> Realization {
    let mut rng = replication_rng(master_seed, index);
    let v = sample(spec.buyer_law.as_ref(), &mut rng, spec.n_buyers);
    let c = sample(spec.seller_law.as_ref(), &mut rng, spec.n_sellers);
    Realization::new(v, c)
        .with_support_bounds(spec.buyer_law.support().0, spec.seller_law.support().1)
}

fn replicate(cfg: &SimulationConfig, index: usize) -> Result<Record> {
    let r = draw_realization(&cfg.spec, cfg.master_seed, index);
    let (quantity, welfare) = match &cfg.transform {
        None => {
            let o = efficient_outcome(&r)?;
            (o.quantity, o.welfare)
        }
        Some(tp) => {
            let o = transformed_outcome(&r, tp)?;
            (o.outcome.quantity, o.outcome.welfare)
        }
    };
    Ok(Record {
        replication: index,
        quantity,
        welfare,
    })
}

/// Runs all replications on a pool of `workers` threads (0 = rayon default).
/// Records are identical for every worker count.
pub fn run_simulation(cfg: &SimulationConfig, workers: usize) -> Result<SimulationReport> {
    let approx = cfg.approx()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let records: Vec<Record> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|i| {
                replicate(cfg, i).map_err(|e| Error::Replication {
                    index: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(build_report(records, approx, cfg.master_seed, cfg.digest()))
}

pub fn standardize(record: &Record, approx: &GaussianApprox) -> Vec2 {
    let root_n = (approx.n_buyers as f64).sqrt();
    [
        (record.quantity as f64 - approx.mean_k) / root_n,
        (record.welfare - approx.mean_w) / root_n,
    ]
}

fn build_report(
    records: Vec<Record>,
    approx: GaussianApprox,
    seed: u64,
    config_digest: String,
) -> SimulationReport {
    let standardized_records: Vec<Vec2> = records.iter().map(|r| standardize(r, &approx)).collect();
    let (empirical_mean, empirical_cov) = mean_and_cov(&standardized_records);
    SimulationReport {
        records,
        standardized_records,
        empirical_mean,
        empirical_cov,
        approx,
        seed,
        config_digest,
    }
}

/// Sample mean and covariance (denominator `n - 1`; zero covariance for one point).
pub fn mean_and_cov(points: &[Vec2]) -> (Vec2, Mat2) {
    let n = points.len() as f64;
    if points.is_empty() {
        return ([f64::NAN; 2], [[f64::NAN; 2]; 2]);
    }
    let mut mean = [0.0; 2];
    for p in points {
        mean[0] += p[0];
        mean[1] += p[1];
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut cov = [[0.0; 2]; 2];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        cov[0][0] += d[0] * d[0];
        cov[0][1] += d[0] * d[1];
        cov[1][1] += d[1] * d[1];
    }
    let denom = (n - 1.0).max(1.0);
    cov[0][0] /= denom;
    cov[0][1] /= denom;
    cov[1][1] /= denom;
    cov[1][0] = cov[0][1];
    (mean, cov)
}

fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Boundary of the smallest mean-centred ellipse `{y : (y-μ)ᵀ Σ⁻¹ (y-μ) <= r²}` with
/// coverage at least `level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidalQuantile {
    pub level: f64,
    pub center: Vec2,
    pub shape: Mat2,
    pub radius2: f64,
}

impl EllipsoidalQuantile {
    pub fn mahalanobis2(&self, y: Vec2) -> f64 {
        mahalanobis2(&self.center, &self.shape, y)
    }

    pub fn contains(&self, y: Vec2) -> bool {
        self.mahalanobis2(y) <= self.radius2
    }

    pub fn coverage(&self, points: &[Vec2]) -> f64 {
        points.iter().filter(|p| self.contains(**p)).count() as f64 / points.len() as f64
    }

    /// `n` points on the boundary, `μ + r L (cos θ, sin θ)` with `L Lᵀ = Σ`.
    pub fn boundary(&self, n: usize) -> Vec<Vec2> {
        let s = &self.shape;
        let l00 = s[0][0].sqrt();
        let l10 = s[1][0] / l00;
        let l11 = (s[1][1] - l10 * l10).max(0.0).sqrt();
        let r = self.radius2.sqrt();
        (0..n)
            .map(|i| {
                let th = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let (c, sn) = (th.cos(), th.sin());
                [
                    self.center[0] + r * l00 * c,
                    self.center[1] + r * (l10 * c + l11 * sn),
                ]
            })
            .collect()
    }
}

fn mahalanobis2(center: &Vec2, shape: &Mat2, y: Vec2) -> f64 {
    let d = [y[0] - center[0], y[1] - center[1]];
    let dt = det(shape);
    // Σ⁻¹ = adj(Σ) / det(Σ)
    (shape[1][1] * d[0] * d[0] - 2.0 * shape[0][1] * d[0] * d[1] + shape[0][0] * d[1] * d[1]) / dt
}

fn check_spd(cov: &Mat2) -> Result<()> {
    let d = det(cov);
    let scale = cov[0][0].abs() * cov[1][1].abs();
    if !(cov[0][0] > 0.0) || !(d > 1e-14 * scale) || !d.is_finite() {
        return Err(Error::SingularCovariance(d));
    }
    Ok(())
}

fn check_level(u: f64, allow_one: bool) -> Result<()> {
    let ok = u > 0.0 && (u < 1.0 || (allow_one && u == 1.0));
    if !ok {
        return Err(Error::InvalidParameter {
            name: "level",
            value: u,
            reason: if allow_one {
                "must lie in (0, 1]"
            } else {
                "must lie in (0, 1)"
            },
        });
    }
    Ok(())
}

/// Ellipsoidal quantile of the bivariate normal `N(mean, cov)`: `r² = -2 ln(1 - u)`.
pub fn ellipsoidal_quantile(mean: Vec2, cov: Mat2, u: f64) -> Result<EllipsoidalQuantile> {
    check_level(u, false)?;
    check_spd(&cov)?;
    Ok(EllipsoidalQuantile {
        level: u,
        center: mean,
        shape: cov,
        radius2: -2.0 * (-u).ln_1p(),
    })
}

/// Ellipsoidal quantile of the empirical law: sample mean and covariance, radius the
/// `⌈u n⌉`-th smallest squared Mahalanobis distance.
pub fn empirical_ellipsoidal_quantile(points: &[Vec2], u: f64) -> Result<EllipsoidalQuantile> {
    check_level(u, true)?;
    if points.len() < 3 {
        return Err(Error::DegenerateSample(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    let (center, shape) = mean_and_cov(points);
    check_spd(&shape)
        .map_err(|_| Error::DegenerateSample("sample covariance is singular".into()))?;
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| mahalanobis2(&center, &shape, *p))
        .collect();
    d2.sort_by(f64::total_cmp);
    let n = d2.len();
    let idx = ((u * n as f64).ceil() as usize).clamp(1, n);
    Ok(EllipsoidalQuantile {
        level: u,
        center,
        shape,
        radius2: d2[idx - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageEntry {
    pub level: f64,
    pub empirical: f64,
    pub error: f64,
}

/// Comparison of standardized samples with the approximating normal law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalityDiagnostics {
    pub replications: usize,
    /// KS distance of the first coordinate against `N(0, σ²)`.
    pub ks_k: f64,
    /// KS distance of the integer `K` against the normal cdf evaluated at `k + 1/2`.
    pub ks_k_lattice: Option<f64>,
    pub ks_w: f64,
    pub ks_critical_1pct: f64,
    pub var_ratio_k: f64,
    pub var_ratio_w: f64,
    pub correlation_empirical: f64,
    pub correlation_theoretical: f64,
    pub correlation_gap: f64,
    pub coverage: Vec<CoverageEntry>,
}

/// Diagnostics for arbitrary standardized points against `N(0, unit_cov)`.
pub fn diagnostics_from_points(
    points: &[Vec2],
    unit_cov: Mat2,
    levels: &[f64],
) -> Result<NormalityDiagnostics> {
    if points.len() < MIN_DIAGNOSTIC_REPLICATIONS {
        return Err(Error::InsufficientReplications {
            needed: MIN_DIAGNOSTIC_REPLICATIONS,
            got: points.len(),
        });
    }
    check_spd(&unit_cov)?;
    let sd_k = unit_cov[0][0].sqrt();
    let sd_w = unit_cov[1][1].sqrt();
    let ks: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let ws: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let (_, cov) = mean_and_cov(points);
    let correlation_empirical = cov[0][1] / (cov[0][0] * cov[1][1]).sqrt();
    let correlation_theoretical = unit_cov[0][1] / (sd_k * sd_w);
    let mut coverage = Vec::with_capacity(levels.len());
    for &u in levels {
        let q = ellipsoidal_quantile([0.0, 0.0], unit_cov, u)?;
        let empirical = q.coverage(points);
        coverage.push(CoverageEntry {
            level: u,
            empirical,
            error: empirical - u,
        });
    }
    Ok(NormalityDiagnostics {
        replications: points.len(),
        ks_k: ks_distance(&ks, |x| std_normal_cdf(x / sd_k)),
        ks_k_lattice: None,
        ks_w: ks_distance(&ws, |x| std_normal_cdf(x / sd_w)),
        ks_critical_1pct: ks_critical_value(points.len(), 0.01),
        var_ratio_k: cov[0][0] / unit_cov[0][0],
        var_ratio_w: cov[1][1] / unit_cov[1][1],
        correlation_empirical,
        correlation_theoretical,
        correlation_gap: correlation_empirical - correlation_theoretical,
        coverage,
    })
}

pub fn normality_diagnostics(report: &SimulationReport) -> Result<NormalityDiagnostics> {
    normality_diagnostics_at(report, &DEFAULT_LEVELS)
}

pub fn normality_diagnostics_at(
    report: &SimulationReport,
    levels: &[f64],
) -> Result<NormalityDiagnostics> {
    let a = &report.approx;
    let mut d = diagnostics_from_points(&report.standardized_records, a.unit_cov(), levels)?;
    let k: Vec<i64> = report.records.iter().map(|r| r.quantity as i64).collect();
    let scale = a.var_k.sqrt();
    d.ks_k_lattice = Some(ks_distance_lattice(&k, |x| {
        std_normal_cdf((x - a.mean_k) / scale)
    }));
    Ok(d)
}

impl SimulationReport {
    /// `replication,K,W,K_std,W_std`
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replication", "K", "W", "K_std", "W_std"])?;
        for (r, s) in self.records.iter().zip(&self.standardized_records) {
            w.write_record([
                r.replication.to_string(),
                r.quantity.to_string(),
                fmt_f64(r.welfare),
                fmt_f64(s[0]),
                fmt_f64(s[1]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn empirical_ellipses(&self, levels: &[f64]) -> Result<Vec<EllipsoidalQuantile>> {
        levels
            .iter()
            .map(|&u| empirical_ellipsoidal_quantile(&self.standardized_records, u))
            .collect()
    }

    pub fn theoretical_ellipses(&self, levels: &[f64]) -> Result<Vec<EllipsoidalQuantile>> {
        levels
            .iter()
            .map(|&u| ellipsoidal_quantile([0.0, 0.0], self.approx.unit_cov(), u))
            .collect()
    }
}

/// `level,x,y`, [`ELLIPSE_POINTS`] rows per ellipse.
pub fn write_ellipses_csv<W: Write>(ellipses: &[EllipsoidalQuantile], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "x", "y"])?;
    for e in ellipses {
        for p in e.boundary(ELLIPSE_POINTS) {
            w.write_record([fmt_f64(e.level), fmt_f64(p[0]), fmt_f64(p[1])])?;
        }
    }
    w.flush()?;
    Ok(())
}
