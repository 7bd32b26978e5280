//! Pipeline configuration: one TOML file drives every subcommand. Defaults
//! reproduce the study protocol constants (20 m sampling interval, 1000
//! random points, 50 m landmark radius, 999 permutations, alpha 0.05,
//! coverage 9, at least 500 images per rater).

use crate::backend::BackendConfig;
use crate::spatial::WeightScheme;
use crate::stats::{TTestVariant, WilcoxonMode};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Input and output locations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Street network GeoJSON (LineString features).
    pub network: PathBuf,
    /// Landmark GeoJSON or CSV; optional — augmentation is skipped without it.
    pub landmarks: Option<PathBuf>,
    /// Directory of directional tiles named `<point_id>_<heading>.png`.
    pub tiles: PathBuf,
    /// Human ratings CSV (`rater_id,point_id,score`).
    pub ratings: PathBuf,
    /// Rater roster CSV (`id,group`).
    pub raters: PathBuf,
    /// Directory for all generated artifacts.
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub interval_m: f64,
    pub random_n: usize,
    pub landmark_radius_m: f64,
    pub dedup_epsilon_m: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            interval_m: 20.0,
            random_n: 1000,
            landmark_radius_m: 50.0,
            dedup_epsilon_m: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelConfig {
    /// Distinct raters per image.
    pub coverage: usize,
    /// Minimum images per rater.
    pub per_rater_min: usize,
}

impl Default for PanelConfig {
    fn default() -> Self {
        Self {
            coverage: 9,
            per_rater_min: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    /// Spatial weights scheme: "knn" or "distance_band".
    pub weights: String,
    /// Neighbor count for knn weights.
    pub k: usize,
    /// Band radius in meters for distance_band weights.
    pub band_m: f64,
    pub permutations: usize,
    pub alpha: f64,
    pub t_variant: TTestVariant,
    pub wilcoxon_mode: WilcoxonMode,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            weights: "knn".to_string(),
            k: 8,
            band_m: 100.0,
            permutations: 999,
            alpha: 0.05,
            t_variant: TTestVariant::Pooled,
            wilcoxon_mode: WilcoxonMode::SignedRank,
        }
    }
}

impl StatsConfig {
    pub fn weight_scheme(&self) -> Result<WeightScheme, ConfigError> {
        match self.weights.as_str() {
            "knn" => Ok(WeightScheme::Knn(self.k)),
            "distance_band" => Ok(WeightScheme::DistanceBand(self.band_m)),
            other => Err(ConfigError::Invalid(format!(
                "stats.weights must be \"knn\" or \"distance_band\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub sampling: SamplingConfig,
    pub backend: BackendConfig,
    pub panel: PanelConfig,
    pub stats: StatsConfig,
    /// Global seed; every randomized stage derives from it.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sampling;
        if !(s.interval_m > 0.0) {
            return Err(ConfigError::Invalid("sampling.interval_m must be > 0".into()));
        }
        if !(s.landmark_radius_m > 0.0) {
            return Err(ConfigError::Invalid(
                "sampling.landmark_radius_m must be > 0".into(),
            ));
        }
        if s.dedup_epsilon_m < 0.0 {
            return Err(ConfigError::Invalid(
                "sampling.dedup_epsilon_m must be >= 0".into(),
            ));
        }
        if self.panel.coverage == 0 {
            return Err(ConfigError::Invalid("panel.coverage must be >= 1".into()));
        }
        if self.stats.permutations == 0 {
            return Err(ConfigError::Invalid("stats.permutations must be >= 1".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(ConfigError::Invalid("stats.alpha must be in (0, 1)".into()));
        }
        self.stats.weight_scheme()?;
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
