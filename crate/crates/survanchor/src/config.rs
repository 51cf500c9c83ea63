//! Run configuration: a sectioned TOML file with defaults for every key,
//! CLI overrides layered on top, and a content hash that ignores the
//! output directory so runs into different directories stay comparable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::assoc::AssocTest;
use crate::clusterlib::MixtureKind;
use crate::coxnet::mlp::FinalActivation;
use crate::data::{FeatureKind, DEFAULT_CLASS_MEANS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("bad config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub source: DatasetSource,
    /// CSV mode only.
    pub csv_path: String,
    pub id_column: Option<String>,
    pub time_column: String,
    pub event_column: String,
    pub features: Vec<FeatureBinding>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBinding {
    pub name: String,
    pub kind: FeatureKind,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            source: DatasetSource::Synthetic,
            csv_path: String::new(),
            id_column: None,
            time_column: "time".to_string(),
            event_column: "event".to_string(),
            features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n: usize,
    pub groups: usize,
    pub dim: usize,
    pub time_variance: f64,
    pub center_radius: f64,
    pub feature_spread: f64,
    pub censor_quantile: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection {
            n: 1000,
            groups: 4,
            dim: 10,
            time_variance: 1e-3,
            center_radius: 5.0,
            feature_spread: 1.0,
            censor_quantile: 0.9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitsSection {
    pub fractions: [f64; 4],
}

impl Default for SplitsSection {
    fn default() -> Self {
        SplitsSection {
            fractions: [0.56, 0.14, 0.08, 0.22],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub layer_counts: Vec<usize>,
    pub embed_dims: Vec<usize>,
    pub max_epochs: usize,
    pub patience: usize,
    pub final_activation: FinalActivation,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch_sizes: vec![64, 128],
            learning_rates: vec![0.01, 0.001],
            layer_counts: vec![1, 2, 3, 4],
            embed_dims: vec![5, 6, 7, 8, 9, 10],
            max_epochs: 100,
            patience: 10,
            final_activation: FinalActivation::UnitNorm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub kind: MixtureKind,
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            kind: MixtureKind::Vmf,
            k_min: 2,
            k_max: 8,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub bins: usize,
    pub test: AssocTest,
    pub fdr_q: f64,
    /// Top fraction of projections feeding each anchor's ranking curve.
    pub alpha: f64,
    /// Rows sampled per bin for the sample table.
    pub sample_size: usize,
    /// Concept filters like "female=1"; each builds one concept anchor.
    pub concepts: Vec<String>,
    /// Fixed component count; overrides the violin knee when set.
    pub k: Option<usize>,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection {
            bins: 7,
            test: AssocTest::Chi2,
            fdr_q: 0.05,
            alpha: 0.05,
            sample_size: 5,
            concepts: Vec::new(),
            k: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub dataset: DatasetSection,
    pub synthetic: SyntheticSection,
    pub splits: SplitsSection,
    pub train: TrainSection,
    pub cluster: ClusterSection,
    pub analyze: AnalyzeSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_toml(&raw)
    }

    pub fn from_toml(raw: &str) -> Result<RunConfig, ConfigError> {
        let config: RunConfig =
            toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset.source == DatasetSource::Csv {
            if self.dataset.csv_path.is_empty() {
                return Err(ConfigError::Invalid(
                    "dataset.source = \"csv\" needs dataset.csv_path".into(),
                ));
            }
            if self.dataset.features.is_empty() {
                return Err(ConfigError::Invalid(
                    "csv datasets need at least one [[dataset.features]] entry".into(),
                ));
            }
        }
        if self.synthetic.groups == 0 || self.synthetic.groups > DEFAULT_CLASS_MEANS.len() {
            return Err(ConfigError::Invalid(format!(
                "synthetic.groups must be in 1..={}",
                DEFAULT_CLASS_MEANS.len()
            )));
        }
        let total: f64 = self.splits.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Invalid(format!(
                "splits.fractions sum to {total}, expected 1"
            )));
        }
        if self.cluster.k_min < 2 || self.cluster.k_max < self.cluster.k_min {
            return Err(ConfigError::Invalid(format!(
                "cluster k range [{}, {}] invalid; need 2 <= k_min <= k_max",
                self.cluster.k_min, self.cluster.k_max
            )));
        }
        if self.analyze.bins == 0 {
            return Err(ConfigError::Invalid("analyze.bins must be positive".into()));
        }
        if !(self.analyze.fdr_q > 0.0 && self.analyze.fdr_q < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "analyze.fdr_q must be in (0, 1), got {}",
                self.analyze.fdr_q
            )));
        }
        if !(self.analyze.alpha > 0.0 && self.analyze.alpha <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "analyze.alpha must be in (0, 1], got {}",
                self.analyze.alpha
            )));
        }
        if self.analyze.sample_size == 0 {
            return Err(ConfigError::Invalid(
                "analyze.sample_size must be positive".into(),
            ));
        }
        for c in &self.analyze.concepts {
            parse_concept(c).map_err(ConfigError::Invalid)?;
        }
        if let Some(k) = self.analyze.k {
            if k < 1 {
                return Err(ConfigError::Invalid("analyze.k must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    /// Content hash over everything except the output directory, so the
    /// same analysis into two directories shares one identity.
    pub fn content_hash(&self) -> String {
        let mut masked = self.clone();
        masked.output.dir = String::new();
        let canonical = serde_json::to_string(&masked).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Parses a concept filter of the form `column=value`.
pub fn parse_concept(raw: &str) -> Result<(String, f64), String> {
    let (name, value) = raw
        .split_once('=')
        .ok_or_else(|| format!("concept filter {raw:?} is not of the form column=value"))?;
    let name = name.trim();
    if name.is_empty() {
        return Err(format!("concept filter {raw:?} has an empty column name"));
    }
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("concept filter {raw:?} has a non-numeric value"))?;
    Ok((name.to_string(), value))
}
