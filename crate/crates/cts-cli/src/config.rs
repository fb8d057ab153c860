//! Run configuration: a TOML file with sections per pipeline stage.
//! Unknown keys are rejected; validation failures name the offending key.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use cts_core::synth::{PriceModel, SynthSpec};
use cts_core::Node2VecParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub period: PeriodConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub null: NullConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub transactions: PathBuf,
    pub prices: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    pub start_date: NaiveDate,
    pub num_weeks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub context_window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub neg_exponent: f64,
    pub symmetrize: bool,
    pub deterministic_training: bool,
    pub procrustes_align: bool,
    pub warm_start: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        let p = Node2VecParams::default();
        Self {
            dim: p.dim,
            p: p.p,
            q: p.q,
            walks_per_node: p.walks_per_node,
            walk_length: p.walk_length,
            context_window: p.context_window,
            negative_samples: p.negative_samples,
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            neg_exponent: p.neg_exponent,
            symmetrize: p.symmetrize,
            deterministic_training: p.deterministic_training,
            procrustes_align: p.procrustes_align,
            warm_start: p.warm_start,
        }
    }
}

impl EmbeddingConfig {
    pub fn to_params(&self) -> Node2VecParams {
        Node2VecParams {
            p: self.p,
            q: self.q,
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            context_window: self.context_window,
            negative_samples: self.negative_samples,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            dim: self.dim,
            neg_exponent: self.neg_exponent,
            symmetrize: self.symmetrize,
            deterministic_training: self.deterministic_training,
            procrustes_align: self.procrustes_align,
            warm_start: self.warm_start,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub delta_t: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { delta_t: 2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullConfig {
    pub sigma_g: f64,
    /// Node count for the Gaussian tensor; ignored when use_data_shape.
    pub n: usize,
    pub dim: usize,
    /// Take (n, dim) from the ingested data and embedding dimension.
    pub use_data_shape: bool,
    /// Explicit seed; derived from the master seed when absent.
    pub seed: Option<u64>,
}

impl Default for NullConfig {
    fn default() -> Self {
        Self {
            sigma_g: 0.5,
            n: 64,
            dim: 8,
            use_data_shape: false,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub max_lag: usize,
    pub delta_tau: usize,
    pub threshold: f64,
    pub margin: f64,
    /// Center week for driver detection; the week with the largest rho_1^1
    /// when absent.
    pub driver_week: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            max_lag: 6,
            delta_tau: 4,
            threshold: 0.05,
            margin: 10.0,
            driver_week: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Master seed; every stage derives its own streams from it.
    pub seed: u64,
    /// Extra embedding seeds for ensemble statistics.
    pub ensemble_seeds: Vec<u64>,
    /// Worker cap; 0 uses all cores. Not part of any config hash.
    pub threads: usize,
    /// Materialize small dense-tensor debug dumps.
    pub dense: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 42,
            ensemble_seeds: Vec::new(),
            threads: 0,
            dense: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub num_nodes: usize,
    pub num_weeks: usize,
    pub base_rate: f64,
    pub driver_fraction: f64,
    pub bubble_weeks: Vec<usize>,
    pub bubble_boost: f64,
    pub price_initial: f64,
    pub price_drift: f64,
    pub price_volatility: f64,
    pub price_bubble_amplitude: f64,
    /// Derived from the master seed when absent.
    pub seed: Option<u64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let spec = SynthSpec::default();
        Self {
            num_nodes: spec.num_nodes,
            num_weeks: spec.num_weeks,
            base_rate: spec.base_rate,
            driver_fraction: spec.driver_fraction,
            bubble_weeks: spec.bubble_weeks.iter().copied().collect(),
            bubble_boost: spec.bubble_boost,
            price_initial: spec.price.initial,
            price_drift: spec.price.drift,
            price_volatility: spec.price.volatility,
            price_bubble_amplitude: spec.price.bubble_amplitude,
            seed: None,
        }
    }
}

impl SynthConfig {
    pub fn to_spec(&self, start_date: NaiveDate, master_seed: u64) -> SynthSpec {
        SynthSpec {
            num_nodes: self.num_nodes,
            num_weeks: self.num_weeks,
            base_rate: self.base_rate,
            driver_fraction: self.driver_fraction,
            bubble_weeks: self.bubble_weeks.iter().copied().collect::<BTreeSet<_>>(),
            bubble_boost: self.bubble_boost,
            price: PriceModel {
                initial: self.price_initial,
                drift: self.price_drift,
                volatility: self.price_volatility,
                bubble_amplitude: self.price_bubble_amplitude,
            },
            start_date,
            seed: self.seed.unwrap_or_else(|| {
                cts_core::rng::derive_seed(master_seed, 0x5E)
            }),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period.num_weeks == 0 {
            bail!("period.num_weeks must be positive");
        }
        self.embedding
            .to_params()
            .validate()
            .map_err(|e| anyhow::anyhow!("embedding: {e}"))?;
        if self.window.delta_t < 1 {
            bail!("window.delta_t must be >= 1");
        }
        if !(self.null.sigma_g > 0.0) {
            bail!("null.sigma_g must be positive");
        }
        if self.null.n < 2 || self.null.dim < 2 {
            bail!("null.n and null.dim must be >= 2");
        }
        if self.analysis.delta_tau < 1 {
            bail!("analysis.delta_tau must be >= 1");
        }
        if !(self.analysis.threshold > 0.0) {
            bail!("analysis.threshold must be positive");
        }
        if self.analysis.margin < 0.0 {
            bail!("analysis.margin must be >= 0");
        }
        let seeds: BTreeSet<u64> = self.run.ensemble_seeds.iter().copied().collect();
        if seeds.len() != self.run.ensemble_seeds.len() {
            bail!("run.ensemble_seeds contains duplicates");
        }
        if self.run.ensemble_seeds.contains(&self.run.seed) {
            bail!("run.ensemble_seeds must not repeat run.seed");
        }
        Ok(())
    }

    pub fn out_dir(&self, stage: &str) -> PathBuf {
        self.paths.output.join(stage)
    }
}
