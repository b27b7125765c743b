use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{HttpGenerator, HttpInpainter, ImageGenerator, Inpainter, ProceduralGenerator, ReferenceInpainter};
use crate::model::ImageSize;
use crate::refinement::{LlmRefiner, Refiner, TemplateRefiner};
use crate::remote::Endpoint;
use crate::scoring::{Embedder, HttpEmbedder, StubEmbedder};
use crate::segmentation::{HttpSegmenter, RegionGrowingSegmenter, Segmenter, SegmenterConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown {role} backend key {key:?}")]
    UnknownBackend { role: &'static str, key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Which prompt the score stage embeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorePrompt {
    /// The user's original scene prompt.
    #[default]
    Initial,
    /// The refined prompt of the current pass.
    Refined,
}

/// Backend selection and pipeline parameters.
///
/// Backend keys are either the name of an offline implementation or an
/// `http://` / `https://` URL of a remote service.
///
/// | role       | offline      |
/// |------------|--------------|
/// | generation | `procedural` |
/// | inpaint    | `procedural` |
/// | segmenter  | `region`     |
/// | refiner    | `template`   |
/// | embedder   | `stub`       |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub generation_backend: String,
    pub inpaint_backend: String,
    pub segmenter: String,
    pub refiner: String,
    pub embedder: String,
    pub feather_radius: u32,
    pub segmenter_config: SegmenterConfig,
    pub artifact_root: PathBuf,
    pub image_width: u32,
    pub image_height: u32,
    pub timeout_secs: u64,
    pub score_against: ScorePrompt,
    /// Environment variable holding a bearer token for remote backends.
    pub api_key_env: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            generation_backend: "procedural".into(),
            inpaint_backend: "procedural".into(),
            segmenter: "region".into(),
            refiner: "template".into(),
            embedder: "stub".into(),
            feather_radius: crate::backends::DEFAULT_FEATHER_RADIUS,
            segmenter_config: SegmenterConfig::default(),
            artifact_root: PathBuf::from("artifacts"),
            image_width: 512,
            image_height: 512,
            timeout_secs: 120,
            score_against: ScorePrompt::Initial,
            api_key_env: None,
        }
    }
}

impl PipelineConfig {
    pub fn image_size(&self) -> ImageSize {
        ImageSize { width: self.image_width, height: self.image_height }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// Hex SHA-256 over everything that affects results (the artifact
    /// root is excluded).
    pub fn fingerprint(&self) -> String {
        let mut copy = self.clone();
        copy.artifact_root = PathBuf::new();
        let json = serde_json::to_vec(&copy).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.segmenter_config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.image_width < crate::backends::MIN_GENERATED_SIDE || self.image_height < crate::backends::MIN_GENERATED_SIDE {
            return Err(ConfigError::Invalid(format!(
                "image size {}x{} is below {}",
                self.image_width,
                self.image_height,
                crate::backends::MIN_GENERATED_SIDE
            )));
        }
        if self.timeout_secs == 0 {
            return Err(ConfigError::Invalid("timeout_secs must be positive".into()));
        }
        Ok(())
    }
}

/// The resolved backend set one orchestrator runs with.
#[derive(Clone)]
pub struct Backends {
    pub generator: Arc<dyn ImageGenerator>,
    pub inpainter: Arc<dyn Inpainter>,
    pub segmenter: Arc<dyn Segmenter>,
    pub refiner: Arc<dyn Refiner>,
    pub embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for Backends {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Backends").field("ids", &self.ids()).finish()
    }
}

/// Identifiers of the backends in a [`Backends`] set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIds {
    pub generation: String,
    pub inpaint: String,
    pub segmenter: String,
    pub refiner: String,
    pub embedder: String,
}

/// Reachability of one configured backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BackendHealth {
    pub role: &'static str,
    pub id: String,
    pub reachable: bool,
}

fn remote_url(key: &str) -> Option<&str> {
    (key.starts_with("http://") || key.starts_with("https://")).then_some(key)
}

impl Backends {
    /// Builds every backend named in `config`.
    pub fn resolve(config: &PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let endpoint = |url: &str| {
            let ep = Endpoint::new(url, config.timeout());
            match &config.api_key_env {
                Some(var) => ep.with_api_key_env(var.clone()),
                None => ep,
            }
        };
        let unknown = |role, key: &str| ConfigError::UnknownBackend { role, key: key.to_owned() };

        let generator: Arc<dyn ImageGenerator> = match config.generation_backend.as_str() {
            "procedural" => Arc::new(ProceduralGenerator::default()),
            key => Arc::new(HttpGenerator::new(endpoint(remote_url(key).ok_or_else(|| unknown("generation", key))?))),
        };
        let inpainter: Arc<dyn Inpainter> = match config.inpaint_backend.as_str() {
            "procedural" => Arc::new(ReferenceInpainter::default()),
            key => Arc::new(HttpInpainter::new(endpoint(remote_url(key).ok_or_else(|| unknown("inpaint", key))?))),
        };
        let segmenter: Arc<dyn Segmenter> = match config.segmenter.as_str() {
            "region" => Arc::new(RegionGrowingSegmenter::new(config.segmenter_config)),
            key => Arc::new(HttpSegmenter::new(endpoint(remote_url(key).ok_or_else(|| unknown("segmenter", key))?))),
        };
        let refiner: Arc<dyn Refiner> = match config.refiner.as_str() {
            "template" => Arc::new(TemplateRefiner),
            key => Arc::new(LlmRefiner::new(endpoint(remote_url(key).ok_or_else(|| unknown("refiner", key))?))),
        };
        let embedder: Arc<dyn Embedder> = match config.embedder.as_str() {
            "stub" => Arc::new(StubEmbedder::default()),
            key => Arc::new(HttpEmbedder::new(endpoint(remote_url(key).ok_or_else(|| unknown("embedder", key))?))),
        };
        Ok(Self { generator, inpainter, segmenter, refiner, embedder })
    }

    /// The offline set: procedural, procedural, region, template, stub.
    pub fn offline() -> Self {
        Self::resolve(&PipelineConfig::default()).expect("default config resolves")
    }

    pub fn ids(&self) -> BackendIds {
        BackendIds {
            generation: self.generator.id().to_owned(),
            inpaint: self.inpainter.id().to_owned(),
            segmenter: self.segmenter.id().to_owned(),
            refiner: self.refiner.id().to_owned(),
            embedder: self.embedder.id().to_owned(),
        }
    }

    pub fn probe_all(&self) -> Vec<BackendHealth> {
        let ids = self.ids();
        vec![
            BackendHealth { role: "generation", id: ids.generation, reachable: self.generator.probe() },
            BackendHealth { role: "inpaint", id: ids.inpaint, reachable: self.inpainter.probe() },
            BackendHealth { role: "segmenter", id: ids.segmenter, reachable: self.segmenter.probe() },
            BackendHealth { role: "refiner", id: ids.refiner, reachable: self.refiner.probe() },
            BackendHealth { role: "embedder", id: ids.embedder, reachable: self.embedder.probe() },
        ]
    }
}
