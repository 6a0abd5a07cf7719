//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embedding::Mode;
use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::measure::{split_measures, DiscreteMeasure, MeasurePair};
use crate::rational::{serde_rational, Rational};
use crate::walk::WalkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    EmbedLaw,
    Unbiased,
    CostCompare,
    Ergodic,
    Tail,
    ExcursionCost,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::EmbedLaw => "embed_law",
            Experiment::Unbiased => "unbiased",
            Experiment::CostCompare => "cost_compare",
            Experiment::Ergodic => "ergodic",
            Experiment::Tail => "tail",
            Experiment::ExcursionCost => "excursion_cost",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    #[default]
    Fixed,
    /// Censored replicas are rerun with doubled horizons up to `max_horizon`.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorKind {
    Stable,
    Fifo,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    pub seed: u64,
    #[serde(with = "serde_rational", default = "unit_dx")]
    pub dx: Rational,
    pub horizon_fwd: u64,
    #[serde(default = "one")]
    pub horizon_bwd: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Standard errors allowed between an estimate and its target.
    pub sigma: f64,
    pub ks_alpha: f64,
    /// Fraction of KS batches that must pass.
    pub ks_pass_fraction: f64,
    pub rel_gap: f64,
    pub censor_fraction: f64,
    /// Tolerance for floating cost comparisons.
    pub cost_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sigma: 3.0,
            ks_alpha: 0.01,
            ks_pass_fraction: 0.97,
            rel_gap: 0.10,
            censor_fraction: 0.2,
            cost_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub walk: WalkSection,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    #[serde(default = "Gauge::standard_set")]
    pub gauges: Vec<Gauge>,
    #[serde(default = "one")]
    pub replicas: u64,
    #[serde(default)]
    pub horizon_policy: HorizonPolicy,
    /// Ceiling for the doubling policy; defaults to `walk.horizon_fwd`.
    #[serde(default)]
    pub max_horizon: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Unbiasedness: lags of the increment tests.
    #[serde(default = "default_lags")]
    pub lags: Vec<u64>,
    #[serde(default = "default_batches")]
    pub batches: u64,
    /// Cost comparison: comparators applied to every path.
    #[serde(default = "default_comparators")]
    pub comparators: Vec<ComparatorKind>,
    /// Excursion cost: random matrices per excursion, and the largest
    /// excursion (in tokens) that is materialized densely.
    #[serde(default = "default_draws")]
    pub comparator_draws: u64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    /// Ergodic: local-time levels `r`; the sweep stops at the largest one.
    #[serde(default)]
    pub r_grid: Vec<f64>,
    #[serde(default = "default_blocks")]
    pub blocks: u64,
    /// Tail: sample-size checkpoints and partial-mean exponents.
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    #[serde(default = "default_moments")]
    pub moments: Vec<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: u64,
    /// Tail: accepted range of the fitted survival exponent.
    #[serde(default = "default_exponent_range")]
    pub exponent_range: [f64; 2],
    /// Embedding law: reference frequencies to test against instead of `nu`.
    #[serde(default)]
    pub reference: Option<ReferenceLaw>,
}

/// Empirical law of `B_{T*}` from an earlier high-replica run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceLaw {
    pub replicas: u64,
    /// `(site, frequency)` pairs.
    pub atoms: Vec<(i64, f64)>,
}

fn unit_dx() -> Rational {
    Rational::from_integer(1)
}

fn one() -> u64 {
    1
}

fn default_lags() -> Vec<u64> {
    vec![1, 4, 16]
}

fn default_batches() -> u64 {
    100
}

fn default_comparators() -> Vec<ComparatorKind> {
    vec![ComparatorKind::Stable, ComparatorKind::Fifo, ComparatorKind::Random]
}

fn default_draws() -> u64 {
    10
}

fn default_max_tokens() -> usize {
    96
}

fn default_blocks() -> u64 {
    20
}

fn default_moments() -> Vec<f64> {
    vec![0.1, 0.25]
}

fn default_bootstrap() -> u64 {
    200
}

fn default_exponent_range() -> [f64; 2] {
    [0.15, 0.35]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be at least 1".into()));
        }
        if self.gauges.is_empty() {
            return Err(Error::Config("at least one gauge is required".into()));
        }
        if !self.mu.is_probability() || !self.nu.is_probability() {
            return Err(Error::Config("mu and nu must be probability measures".into()));
        }
        self.walk_config().validate()?;
        if self.max_horizon.is_some_and(|m| m < self.walk.horizon_fwd) {
            return Err(Error::Config("max_horizon is below walk.horizon_fwd".into()));
        }
        let t = &self.thresholds;
        if !(t.sigma > 0.0 && t.ks_alpha > 0.0 && t.ks_alpha < 1.0 && t.rel_gap > 0.0 && t.cost_tol >= 0.0) {
            return Err(Error::Config("thresholds must be positive (ks_alpha in (0, 1))".into()));
        }
        if !(0.0..=1.0).contains(&t.censor_fraction) || !(0.0..=1.0).contains(&t.ks_pass_fraction) {
            return Err(Error::Config("fractions must lie in [0, 1]".into()));
        }
        if self.lags.contains(&0) || self.batches == 0 || self.blocks < 2 {
            return Err(Error::Config("lags must be positive, batches >= 1 and blocks >= 2".into()));
        }
        if self.r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("r_grid entries must be positive".into()));
        }
        if self.moments.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Config("moments must be positive".into()));
        }
        let [lo, hi] = self.exponent_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config("exponent_range must be an ordered pair".into()));
        }
        if let Some(r) = &self.reference {
            let total: f64 = r.atoms.iter().map(|a| a.1).sum();
            if r.replicas == 0 || r.atoms.iter().any(|a| !(0.0..=1.0).contains(&a.1)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config("reference law must list frequencies summing to 1".into()));
            }
        }
        Ok(())
    }

    pub fn pair(&self) -> Result<MeasurePair> {
        split_measures(&self.mu, &self.nu)
    }

    /// Embedding mode: explicit, or inferred from the pair.
    pub fn mode(&self, pair: &MeasurePair) -> Mode {
        self.mode.unwrap_or_else(|| Mode::for_pair(pair))
    }

    pub fn walk_config(&self) -> WalkConfig {
        let mut w = WalkConfig::new(self.walk.seed, self.walk.horizon_fwd, self.walk.horizon_bwd, self.mu.clone());
        w.dx = self.walk.dx;
        w
    }

    pub fn dt(&self) -> f64 {
        self.walk_config().dt()
    }

    pub fn max_horizon(&self) -> u64 {
        match self.horizon_policy {
            HorizonPolicy::Fixed => self.walk.horizon_fwd,
            HorizonPolicy::Doubling => self.max_horizon.unwrap_or(self.walk.horizon_fwd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "embed_law",
        "walk": {"seed": 7, "horizon_fwd": 1000},
        "mu": {"denominator": 1, "atoms": [[0, 1]]},
        "nu": {"denominator": 1, "atoms": [[1, 1]]}
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.replicas, 1);
        assert_eq!(c.gauges.len(), 4);
        assert_eq!(c.lags, vec![1, 4, 16]);
        assert_eq!(c.thresholds.sigma, 3.0);
        assert_eq!(c.max_horizon(), 1000);
        assert_eq!(c.dt(), 1.0);
    }

    #[test]
    fn rejects_bad_documents() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Parse(_))));
        let extra = MINIMAL.replace("\"experiment\"", "\"bogus\": 1, \"experiment\"");
        assert!(matches!(ExperimentConfig::from_json(&extra), Err(Error::Parse(_))));
        let zero = MINIMAL.replace("\"experiment\"", "\"replicas\": 0, \"experiment\"");
        assert!(matches!(ExperimentConfig::from_json(&zero), Err(Error::Config(_))));
        let sub = MINIMAL.replace("1, \"atoms\": [[1, 1]]", "2, \"atoms\": [[1, 1]]");
        assert!(matches!(ExperimentConfig::from_json(&sub), Err(Error::Config(_))));
    }

    #[test]
    fn doubling_ceiling() {
        let c = MINIMAL.replace("\"experiment\"", "\"horizon_policy\": \"doubling\", \"max_horizon\": 4096, \"experiment\"");
        assert_eq!(ExperimentConfig::from_json(&c).unwrap().max_horizon(), 4096);
        let low = MINIMAL.replace("\"experiment\"", "\"max_horizon\": 10, \"experiment\"");
        assert!(ExperimentConfig::from_json(&low).is_err());
    }
}
