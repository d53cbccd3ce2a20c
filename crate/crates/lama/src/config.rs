//! Run configuration: one TOML file plus flag overrides.
//!
//! The API key never appears here — only the name of the environment
//! variable that holds it.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    BackendConfig, CachedBackend, ChatBackend, HttpBackend, MockBackend, MockKnowledgeBase,
};
use crate::prediction::{AblationFlags, PipelineConfig};
use crate::taxonomy::{Granularity, LabelSpace, Taxonomy};

/// How region- and continent-level predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    /// Re-prompt the pipeline with the coarser label list substituted.
    NativePrompt,
    /// Predict nationalities and map them through the taxonomy at
    /// evaluation time.
    #[default]
    MappedFromNationality,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    pub max_recall: usize,
    /// Ranking depth. When unset, defaults by granularity: 5 for
    /// nationality, 3 for regions and continents.
    pub top_k: Option<usize>,
    pub granularity: Granularity,
    pub region_mode: RegionMode,
    pub concurrency_limit: usize,
    pub ablation: AblationFlags,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            max_recall: 4,
            top_k: None,
            granularity: Granularity::Nationality,
            region_mode: RegionMode::default(),
            concurrency_limit: 8,
            ablation: AblationFlags::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSettings {
    pub taxonomy_path: PathBuf,
    pub mock_kb_path: Option<PathBuf>,
    /// Split manifest supplying the frequency order and bin assignment.
    pub manifest_path: Option<PathBuf>,
}

impl Default for DataSettings {
    fn default() -> Self {
        DataSettings {
            taxonomy_path: PathBuf::from("crates/lama/data/nationalities.tsv"),
            mock_kb_path: None,
            manifest_path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub seed: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { seed: 42 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub pipeline: PipelineSettings,
    pub data: DataSettings,
    pub run: RunSettings,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pipeline.max_recall == 0 {
            return Err(ConfigError::Invalid("max_recall must be >= 1".into()));
        }
        if self.pipeline.top_k == Some(0) {
            return Err(ConfigError::Invalid("top_k must be >= 1".into()));
        }
        if self.pipeline.concurrency_limit == 0 {
            return Err(ConfigError::Invalid(
                "concurrency_limit must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// The effective ranking depth: the configured value, or 5 for
    /// nationality and 3 for the coarser granularities.
    pub fn effective_top_k(&self) -> usize {
        self.pipeline
            .top_k
            .unwrap_or(match self.pipeline.granularity {
                Granularity::Nationality => 5,
                Granularity::Region14 | Granularity::Continent6 => 3,
            })
    }

    /// The granularity the pipeline actually prompts at. Under the mapped
    /// region mode, coarse-grained runs still predict nationalities; the
    /// mapping happens at evaluation time.
    pub fn prompt_granularity(&self) -> Granularity {
        match (self.pipeline.granularity, self.pipeline.region_mode) {
            (Granularity::Nationality, _) => Granularity::Nationality,
            (g, RegionMode::NativePrompt) => g,
            (_, RegionMode::MappedFromNationality) => Granularity::Nationality,
        }
    }

    pub fn load_taxonomy(&self) -> Result<Taxonomy, crate::taxonomy::TaxonomyError> {
        Taxonomy::load(&self.data.taxonomy_path)
    }

    /// Label space the pipeline prompts with.
    pub fn prompt_space(&self, taxonomy: &Taxonomy) -> Result<LabelSpace, ConfigError> {
        let space = taxonomy.label_space(self.prompt_granularity());
        if self.effective_top_k() > space.len() {
            return Err(ConfigError::Invalid(format!(
                "top_k={} exceeds the {} available labels",
                self.effective_top_k(),
                space.len()
            )));
        }
        Ok(space)
    }

    /// Build the configured backend: mock when a knowledge base is given,
    /// live HTTP otherwise, either one wrapped in the replay cache when a
    /// cache path is set.
    pub fn build_backend(
        &self,
        space: &LabelSpace,
    ) -> Result<Arc<dyn ChatBackend>, crate::backend::BackendError> {
        let inner: Arc<dyn ChatBackend> = match &self.data.mock_kb_path {
            Some(path) => {
                let kb = MockKnowledgeBase::load(path)?;
                Arc::new(MockBackend::new(kb, space)?)
            }
            None => Arc::new(HttpBackend::new(self.backend.clone())?),
        };
        match &self.backend.cache_path {
            Some(path) => Ok(Arc::new(CachedBackend::open(inner, path)?)),
            None => Ok(inner),
        }
    }

    pub fn pipeline_config(
        &self,
        frequency_order: Option<Vec<crate::taxonomy::Label>>,
    ) -> PipelineConfig {
        PipelineConfig {
            model_id: self.backend.model_id.clone(),
            max_recall: self.pipeline.max_recall,
            top_k: self.effective_top_k(),
            ablation: self.pipeline.ablation,
            frequency_order,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_paper_faithful() {
        let mut config = RunConfig::default();
        assert_eq!(config.pipeline.max_recall, 4);
        assert_eq!(config.effective_top_k(), 5);
        assert_eq!(config.pipeline.granularity, Granularity::Nationality);
        assert_eq!(config.backend.model_id, "gpt-4.1-mini");
        config.validate().unwrap();

        config.pipeline.granularity = Granularity::Region14;
        assert_eq!(config.effective_top_k(), 3);
        config.pipeline.granularity = Granularity::Continent6;
        assert_eq!(config.effective_top_k(), 3);
    }

    #[test]
    fn toml_round_trip_with_partial_file() {
        let text = r#"
            [pipeline]
            top_k = 3
            granularity = "region14"

            [backend]
            model_id = "test-model"
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(config.pipeline.top_k, Some(3));
        assert_eq!(config.pipeline.granularity, Granularity::Region14);
        assert_eq!(config.pipeline.max_recall, 4); // default survives
        assert_eq!(config.backend.model_id, "test-model");
    }

    #[test]
    fn zero_limits_rejected() {
        let mut config = RunConfig::default();
        config.pipeline.top_k = Some(0);
        assert!(config.validate().is_err());
    }

    #[test]
    fn mapped_mode_prompts_at_nationality() {
        let mut config = RunConfig::default();
        config.pipeline.granularity = Granularity::Region14;
        config.pipeline.region_mode = RegionMode::MappedFromNationality;
        assert_eq!(config.prompt_granularity(), Granularity::Nationality);
        config.pipeline.region_mode = RegionMode::NativePrompt;
        assert_eq!(config.prompt_granularity(), Granularity::Region14);
    }
}
