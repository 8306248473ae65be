//! Versioned JSON run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionConfig, UniformParams, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::market::MarketSpec;
use crate::montecarlo::{SimulationConfig, DEFAULT_LEVELS};
use crate::transforms::{composite_laws, TransformConfig, TransformPair};

pub const CONFIG_VERSION: u32 = 1;
pub const SEED_ENV: &str = "MARKET_ASYMPTOTICS_SEED";
pub const DEFAULT_REPLICATIONS: usize = 10_000;
pub const DEFAULT_GRID: usize = 1024;

fn default_law() -> DistributionConfig {
    DistributionConfig::Uniform(UniformParams { lo: 0.0, hi: 1.0 })
}

fn default_transform() -> TransformConfig {
    TransformConfig::Identity
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub n_buyers: usize,
    pub n_sellers: usize,
    #[serde(default = "default_law")]
    pub buyer_law: DistributionConfig,
    #[serde(default = "default_law")]
    pub seller_law: DistributionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub market: MarketConfig,
    #[serde(default = "default_transform")]
    pub transform: TransformConfig,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Asserts that buyers and sellers share one continuous law.
    #[serde(default)]
    pub equal_laws: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.market.n_buyers == 0 || self.market.n_sellers == 0 {
            return Err(Error::Config(format!(
                "market needs at least one buyer and one seller (got N={}, M={})",
                self.market.n_buyers, self.market.n_sellers
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(u) = self.levels.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(Error::Config(format!("quantile level {u} outside (0, 1)")));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.market.buyer_law.build()?;
        self.market.seller_law.build()?;
        Ok(())
    }

    pub fn market_spec(&self) -> Result<MarketSpec> {
        MarketSpec::new(
            self.market.n_buyers,
            self.market.n_sellers,
            self.market.buyer_law.build()?,
            self.market.seller_law.build()?,
        )
    }

    /// `None` for the identity transform.
    pub fn transform_pair(&self, spec: &MarketSpec) -> Result<Option<TransformPair>> {
        if self.transform == TransformConfig::Identity {
            return Ok(None);
        }
        self.transform
            .build(&spec.buyer_law, &spec.seller_law)
            .map(Some)
    }

    /// Spec whose laws describe the quantities the mechanism trades on: the
    /// pushforward laws under a non-identity transform.
    pub fn effective_spec(&self) -> Result<MarketSpec> {
        let spec = self.market_spec()?;
        match self.transform_pair(&spec)? {
            None => Ok(spec),
            Some(tp) => {
                let (fb, gs) = composite_laws(&spec.buyer_law, &spec.seller_law, &tp)?;
                MarketSpec::new(spec.n_buyers, spec.n_sellers, fb, gs)
            }
        }
    }

    pub fn simulation(&self, seed: u64) -> Result<SimulationConfig> {
        let spec = self.market_spec()?;
        let tp = self.transform_pair(&spec)?;
        let cfg = SimulationConfig::new(spec, self.replications, seed)?;
        Ok(match tp {
            Some(tp) => cfg.with_transform(tp),
            None => cfg,
        })
    }
}

/// Seed precedence: command line, then config file, then environment.
pub fn resolve_seed(cli: Option<u64>, config: Option<u64>, env: Option<&str>) -> Result<u64> {
    if let Some(s) = cli.or(config) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| {
            Error::Config(format!(
                "{SEED_ENV}={v:?} is not an unsigned 64-bit integer"
            ))
        }),
        None => Err(Error::Config(format!(
            "no seed given: pass --seed, set \"seed\" in the config, or export {SEED_ENV}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIGURE: &str = r#"{
        "version": 1,
        "market": {
            "n_buyers": 250,
            "n_sellers": 500,
            "buyer_law": {"family": "uniform", "params": {"lo": 0, "hi": 1}},
            "seller_law": {"family": "power", "params": {"exponent": 2}}
        },
        "replications": 10000,
        "seed": 20160101
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_json(FIGURE).unwrap();
        assert_eq!(c.transform, TransformConfig::Identity);
        assert_eq!(c.levels, vec![0.25, 0.5, 0.95]);
        assert_eq!(c.epsilon, 0.01);
        assert_eq!(c.market_spec().unwrap().lambda(), 2.0);
        let back = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&back).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"version": 2, "market": {"n_buyers": 1, "n_sellers": 1}}"#,
            r#"{"version": 1, "market": {"n_buyers": 0, "n_sellers": 1}}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1}, "replications": 0}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1}, "colour": "red"}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1, "extra": 0}}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1}, "levels": [1.0]}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1}, "epsilon": -1}"#,
            r#"{"version": 1, "market": {"n_buyers": 1, "n_sellers": 1,
                "buyer_law": {"family": "uniform", "params": {"lo": 1, "hi": 0}}}}"#,
            r#"{"market": {"n_buyers": 1, "n_sellers": 1}}"#,
            "not json",
        ] {
            let e = RunConfig::from_json(bad).unwrap_err();
            assert!(e.is_config_error(), "{bad}: {e}");
        }
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some("3")).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some("3")).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some(" 3 ")).unwrap(), 3);
        assert!(resolve_seed(None, None, Some("x"))
            .unwrap_err()
            .is_config_error());
        assert!(resolve_seed(None, None, None)
            .unwrap_err()
            .is_config_error());
    }

    #[test]
    fn transform_selection() {
        let c = RunConfig::from_json(
            r#"{"version": 1, "market": {"n_buyers": 5, "n_sellers": 5}, "transform": "virtual_values"}"#,
        )
        .unwrap();
        let sim = c.simulation(1).unwrap();
        assert!(sim.transform.is_some());
        assert_eq!(c.effective_spec().unwrap().buyer_law.support(), (-1.0, 1.0));
        let c = RunConfig::from_json(FIGURE).unwrap();
        assert!(c.simulation(1).unwrap().transform.is_none());
    }
}
