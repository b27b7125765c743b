//! Service configuration: one TOML file plus environment overrides.
//!
//! ```toml
//! port = 8080
//!
//! [pipeline]
//! artifact_root = "/var/lib/studio"
//! refiner = "http://llm.internal:9000/refine"
//! feather_radius = 8
//! ```
//!
//! | variable             | overrides                    |
//! |----------------------|------------------------------|
//! | `PORT`               | `port`                       |
//! | `ARTIFACT_ROOT`      | `pipeline.artifact_root`     |
//! | `GENERATION_BACKEND` | `pipeline.generation_backend`|
//! | `INPAINT_BACKEND`    | `pipeline.inpaint_backend`   |
//! | `SEGMENTER_BACKEND`  | `pipeline.segmenter`         |
//! | `REFINER_BACKEND`    | `pipeline.refiner`           |
//! | `EMBEDDER_BACKEND`   | `pipeline.embedder`          |
//! | `API_KEY_ENV`        | `pipeline.api_key_env`       |
//!
//! The API key itself is read at request time from the variable named by
//! `pipeline.api_key_env` (default `STUDIO_API_KEY`), so it never lands in
//! the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use studio_core::orchestrator::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {var}")]
    Env { var: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub host: String,
    pub port: u16,
    pub pipeline: PipelineConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        let pipeline = PipelineConfig { api_key_env: Some("STUDIO_API_KEY".into()), ..Default::default() };
        Self { host: "127.0.0.1".into(), port: 8080, pipeline }
    }
}

impl ServerConfig {
    /// Reads `file` (if given), then applies overrides from `env`.
    pub fn load(file: Option<&Path>, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
                toml::from_str(&text)?
            }
            None => ServerConfig::default(),
        };
        if let Some(port) = env("PORT") {
            config.port = port.parse().map_err(|_| ConfigError::Env { var: "PORT", value: port })?;
        }
        if let Some(root) = env("ARTIFACT_ROOT") {
            config.pipeline.artifact_root = root.into();
        }
        let p = &mut config.pipeline;
        let keys: [(&str, &mut String); 5] = [
            ("GENERATION_BACKEND", &mut p.generation_backend),
            ("INPAINT_BACKEND", &mut p.inpaint_backend),
            ("SEGMENTER_BACKEND", &mut p.segmenter),
            ("REFINER_BACKEND", &mut p.refiner),
            ("EMBEDDER_BACKEND", &mut p.embedder),
        ];
        for (var, slot) in keys {
            if let Some(v) = env(var) {
                *slot = v;
            }
        }
        if let Some(v) = env("API_KEY_ENV") {
            p.api_key_env = Some(v);
        }
        Ok(config)
    }
}
