use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::AeTrainConfig;
use crate::error::{Error, Result};
use crate::geometry::CropMode;
use crate::harness::synth::ShapeFamily;
use crate::refiner::{RefineEnvConfig, Td3Config};
use crate::selector::PointNnConfig;

/// Where a category's complete shapes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CategorySource {
    Synthetic { family: ShapeFamily, count: usize },
    /// Every `.xyz`/`.pcf` file in the directory, in file-name order; the
    /// file stem is the sample id.
    Directory { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub source: CategorySource,
}

impl CategorySpec {
    pub fn synthetic(family: ShapeFamily, count: usize) -> Self {
        Self {
            name: family.name().to_string(),
            source: CategorySource::Synthetic { family, count },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CropConfig {
    pub mode: CropMode,
    pub ratio: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self {
            mode: CropMode::Spherical,
            ratio: 0.25,
        }
    }
}

/// Everything a pipeline run depends on besides its inputs on disk. All
/// randomness flows from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub categories: Vec<CategorySpec>,
    /// Points per complete shape and per decoded cloud.
    pub points: usize,
    pub crop: CropConfig,
    pub ae: AeTrainConfig,
    pub agent: Td3Config,
    pub env: RefineEnvConfig,
    pub selector: PointNnConfig,
    /// Use ground truth alongside the quality score when selecting.
    pub dual_criterion: bool,
    /// F-score threshold as a fraction of the ground-truth diagonal.
    pub fscore_tau: f64,
    pub train_fraction: f64,
    /// Load baseline completions from `<dir>/<category>/<id>.{pcf,xyz}`
    /// instead of running the surrogate completer.
    pub completions_dir: Option<PathBuf>,
    /// Load trained autoencoder, policy and bank from a previous run's
    /// output directory instead of training them.
    pub artifacts_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Three synthetic families of 100 shapes with 256 points each.
    pub fn desk() -> Self {
        Self {
            categories: ShapeFamily::ALL.iter().map(|&f| CategorySpec::synthetic(f, 100)).collect(),
            points: 256,
            crop: CropConfig::default(),
            ae: AeTrainConfig::desk(),
            agent: Td3Config::desk(),
            env: RefineEnvConfig::default(),
            selector: PointNnConfig::default(),
            dual_criterion: true,
            fscore_tau: 0.01,
            train_fraction: 0.8,
            completions_dir: None,
            artifacts_dir: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::invalid("config lists no categories"));
        }
        let mut names: Vec<&str> = self.categories.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("category names must be unique"));
        }
        for c in &self.categories {
            if c.name.is_empty() || c.name.contains(|ch: char| ch.is_whitespace() || ch == '/' || ch == ',') {
                return Err(Error::invalid(format!("category name `{}` is not a plain word", c.name)));
            }
        }
        if !(self.crop.ratio > 0.0 && self.crop.ratio < 1.0) {
            return Err(Error::invalid(format!("crop ratio must lie in (0, 1), got {}", self.crop.ratio)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        if self.fscore_tau <= 0.0 {
            return Err(Error::invalid("F-score threshold must be positive"));
        }
        if self.ae.architecture.output_size != self.points {
            return Err(Error::invalid(format!(
                "autoencoder output size {} differs from the configured point count {}",
                self.ae.architecture.output_size, self.points
            )));
        }
        self.env.validate()?;
        self.agent.resolved().validate()?;
        self.selector.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// First eight bytes of the SHA-256 of the parts joined by `/`.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let digest = Sha256::digest(parts.join("/").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

/// Seed for one named stage, independent of every other stage.
pub fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let s = seed.to_string();
    let mut all = vec![s.as_str()];
    all.extend_from_slice(parts);
    stable_hash(&all)
}

/// Deterministic split by hashed id: about `train_fraction` of ids train.
pub fn is_train_id(id: &str, train_fraction: f64) -> bool {
    ((stable_hash(&[id]) % 10_000) as f64) < train_fraction * 10_000.0
}
