//! The run configuration file (TOML). Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::{AllocationPolicy, PipelineConfig};
use crate::error::{Error, Result};
use crate::ledger::LedgerConfig;
use crate::pipelines::SyntheticSource;
use crate::simulator::{SimConfig, Strategy};
use crate::validators::ValidatorConfig;

fn default_global() -> LedgerConfig {
    LedgerConfig::basic(1.0, 1e-6)
}

fn default_rps() -> usize {
    16_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledPipeline {
    #[serde(default)]
    pub arrival: u64,
    pub pipeline: PipelineConfig,
}

/// An adaptive-training run over one synthetic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveRun {
    #[serde(default)]
    pub policy: AllocationPolicy,
    #[serde(default = "default_rps")]
    pub records_per_step: usize,
    pub horizon: u64,
    pub source: SyntheticSource,
    pub pipelines: Vec<ScheduledPipeline>,
}

fn all_strategies() -> Vec<Strategy> {
    Strategy::all().to_vec()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "all_strategies")]
    pub strategies: Vec<Strategy>,
    pub rates: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_global")]
    pub global: LedgerConfig,
    pub validator: Option<ValidatorConfig>,
    pub simulation: Option<SimConfig>,
    pub sweep: Option<SweepConfig>,
    pub adaptive: Option<AdaptiveRun>,
    pub output: Option<OutputConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            global: default_global(),
            validator: None,
            simulation: None,
            sweep: None,
            adaptive: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.global.validate()?;
        if let Some(v) = &cfg.validator {
            v.validate()?;
        }
        if let Some(s) = &cfg.simulation {
            s.validate()?;
        }
        if let Some(a) = &cfg.adaptive {
            a.source.validate()?;
            for p in &a.pipelines {
                p.pipeline.validate()?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::Config(format!("config has no [{name}] section")))
    }
}
