//! Run configuration. Every key has a default except the ones a command
//! needs (`design.rate` for `design`, `codebook` where a fixed set is
//! simulated or analyzed); unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use vmscma::montecarlo::{CellConfig, Density};
use vmscma::{Campaign, CodebookSpec, Deployment64, DesignOptions, FactorGraph, ModCombination, MpaConfig, Scheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Master seed for every random draw of the run.
    pub seed: u64,
    /// Built-in factor graph id.
    pub graph: String,
    /// Fixed codebook set for `simulate` (ser / cell ser) and `analyze`.
    pub codebook: Option<CodebookSpec>,
    pub deployment: DeploymentSection,
    pub design: DesignSection,
    pub campaign: CampaignSection,
    pub decoder: MpaConfig,
    pub simulate: SimulateSection,
    pub adapt: AdaptSection,
    pub analyze: AnalyzeSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            graph: "default-4x6".into(),
            codebook: None,
            deployment: DeploymentSection::default(),
            design: DesignSection::default(),
            campaign: CampaignSection::default(),
            decoder: MpaConfig::default(),
            simulate: SimulateSection::default(),
            adapt: AdaptSection::default(),
            analyze: AnalyzeSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentSection {
    /// User distances; defaults to every layer at distance 1.
    pub distances: Option<Vec<f64>>,
    pub alpha: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for DeploymentSection {
    fn default() -> Self {
        Self {
            distances: None,
            alpha: 2.0,
            d_min: 1.0,
            d_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub rate: Option<u32>,
    pub restarts: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            rate: None,
            restarts: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignSection {
    pub snr_db: Vec<f64>,
    pub trials_cap: u64,
    pub target_errors: u64,
    pub batch_size: u64,
}

impl Default for CampaignSection {
    fn default() -> Self {
        let c = Campaign::default();
        Self {
            snr_db: c.snr_db,
            trials_cap: c.trials_cap,
            target_errors: c.target_errors,
            batch_size: c.batch_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    #[default]
    Ser,
    Throughput,
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellMetricKind {
    #[default]
    Ser,
    Throughput,
    Gain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub mode: SimMode,
    pub scheme: Scheme,
    pub ser_threshold: f64,
    pub cell: CellSection,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            mode: SimMode::Ser,
            scheme: Scheme::Avm,
            ser_threshold: 0.01,
            cell: CellSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSection {
    pub samples: usize,
    pub density: Density,
    pub metric: CellMetricKind,
    /// Modes compared by the `gain` metric.
    pub gain_modes: [usize; 2],
}

impl Default for CellSection {
    fn default() -> Self {
        Self {
            samples: 1000,
            density: Density::UniformRadius,
            metric: CellMetricKind::Ser,
            gain_modes: [6, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptSection {
    pub snr_db: Vec<f64>,
    pub ser_threshold: f64,
    pub scheme: Scheme,
    /// Further deployments evaluated after `[deployment]`.
    pub extra_distances: Vec<Vec<f64>>,
}

impl Default for AdaptSection {
    fn default() -> Self {
        Self {
            snr_db: (0..=40).step_by(2).map(f64::from).collect(),
            ser_threshold: 0.01,
            scheme: Scheme::Avm,
            extra_distances: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub snr_db: Vec<f64>,
    /// Include the full union bound (skipped when the set is too large).
    pub union_bound: bool,
    pub gain_modes: Option<[usize; 2]>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            snr_db: (0..=30).step_by(2).map(f64::from).collect(),
            union_bound: true,
            gain_modes: None,
        }
    }
}

/// What a run needs beyond the parsed file: the fully built inputs.
pub struct Resolved {
    pub graph: FactorGraph,
    pub deployment: Deployment64,
    pub campaign: Campaign,
    pub design: DesignOptions,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("parsing TOML config")
    }

    /// Reads a TOML config, or the resolved config of a `manifest.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: crate::manifest::Manifest =
                serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
            return Ok(m.config);
        }
        Self::from_toml(&text)
    }

    pub fn deployment_for(&self, distances: Option<&[f64]>) -> Result<Deployment64> {
        let d = self.deployment.clone();
        let graph = FactorGraph::preset(&self.graph)?;
        let distances = distances
            .map(<[f64]>::to_vec)
            .or(d.distances)
            .unwrap_or_else(|| vec![1.0; graph.layers()]);
        ensure!(
            distances.len() == graph.layers(),
            "{} distances for {} layers of `{}`",
            distances.len(),
            graph.layers(),
            self.graph
        );
        Ok(Deployment64::with_bounds(distances, d.alpha, d.d_min, d.d_max)?)
    }

    pub fn cell(&self) -> Result<CellConfig> {
        let graph = FactorGraph::preset(&self.graph)?;
        Ok(CellConfig {
            users: graph.layers(),
            samples: self.simulate.cell.samples,
            d_min: self.deployment.d_min,
            d_max: self.deployment.d_max,
            alpha: self.deployment.alpha,
            density: self.simulate.cell.density,
        })
    }

    pub fn codebook(&self) -> Result<CodebookSpec> {
        let Some(spec) = self.codebook.clone() else {
            bail!("`codebook` is required for this command (e.g. codebook = {{ rate = 12 }})");
        };
        Ok(match spec {
            CodebookSpec::Combination(c) => CodebookSpec::Combination(ModCombination::new(c.orders().to_vec())?),
            other => other,
        })
    }

    /// Checks everything shared by the commands and builds the inputs.
    pub fn resolve(&self, workers: usize) -> Result<Resolved> {
        let graph = FactorGraph::preset(&self.graph)?;
        let deployment = self.deployment_for(None)?;
        ensure!(self.design.restarts > 0, "design.restarts must be positive");
        let campaign = Campaign {
            snr_db: self.campaign.snr_db.clone(),
            trials_cap: self.campaign.trials_cap,
            target_errors: self.campaign.target_errors,
            batch_size: self.campaign.batch_size,
            seed: self.seed,
            decoder: self.decoder,
            workers,
        };
        campaign.validate()?;
        for (name, x) in [
            ("simulate.ser_threshold", self.simulate.ser_threshold),
            ("adapt.ser_threshold", self.adapt.ser_threshold),
        ] {
            ensure!(x > 0.0 && x < 1.0, "{name} = {x} must lie in (0, 1)");
        }
        Ok(Resolved {
            graph,
            deployment,
            campaign,
            design: DesignOptions {
                seed: self.seed,
                restarts: self.design.restarts,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert!(c.resolve(0).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml("sed = 3").is_err());
        assert!(Config::from_toml("[campaign]\ntrials = 3").is_err());
    }

    #[test]
    fn codebook_forms_parse() {
        let c = Config::from_toml("codebook = { rate = 12 }").unwrap();
        assert_eq!(c.codebook().unwrap(), CodebookSpec::Rate(12));
        let c = Config::from_toml("codebook = { combination = [8, 2, 2, 4, 4, 8] }").unwrap();
        assert_eq!(c.codebook().unwrap(), CodebookSpec::Combination(ModCombination::new(vec![2, 2, 4, 4, 8, 8]).unwrap()));
        let c = Config::from_toml("codebook = { tm = 5 }").unwrap();
        assert_eq!(c.codebook().unwrap(), CodebookSpec::Tm(5));
        let c = Config::from_toml("codebook = { combination = [3, 2, 2, 4, 4, 8] }").unwrap();
        assert!(c.codebook().is_err());
    }

    #[test]
    fn zero_trials_fail_validation() {
        let c = Config::from_toml("[campaign]\ntrials_cap = 0").unwrap();
        assert!(c.resolve(0).is_err());
    }

    #[test]
    fn distance_count_must_match_graph() {
        let c = Config::from_toml("[deployment]\ndistances = [1.0, 2.0]").unwrap();
        assert!(c.resolve(0).is_err());
    }
}
