use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    BackendIds, Backends, MaskInput, NewSession, Orchestrator, OrchestratorError, PipelineConfig, Stage, StageRequest,
};
use crate::codec;
use crate::model::{ArtifactRef, MaskSeed, ScoreReport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("scenario field `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

/// Per-scenario backend overrides; unset roles keep the configured key.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendOverrides {
    #[serde(default)]
    pub generation: Option<String>,
    #[serde(default)]
    pub inpaint: Option<String>,
    #[serde(default)]
    pub segmenter: Option<String>,
    #[serde(default)]
    pub refiner: Option<String>,
    #[serde(default)]
    pub embedder: Option<String>,
}

/// A non-interactive end-to-end run.
///
/// ```json
/// {
///   "initial_prompt": "a chocolate river flowing through candy hills",
///   "target_description": "chocolate river",
///   "seed": 11,
///   "mask_seed": {"kind": "box", "box": [16, 80, 111, 111]}
/// }
/// ```
///
/// Exactly one of `mask_seed` and `mask_file` (a 0/255 grayscale PNG,
/// relative to the scenario file) must be given. `refined_prompt` stands
/// in for the user's edit of the refiner's suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub initial_prompt: String,
    pub target_description: String,
    pub seed: u64,
    #[serde(default)]
    pub mask_seed: Option<MaskSeed>,
    #[serde(default)]
    pub mask_file: Option<PathBuf>,
    #[serde(default)]
    pub backends: Option<BackendOverrides>,
    #[serde(default)]
    pub style_hint: Option<String>,
    #[serde(default)]
    pub refined_prompt: Option<String>,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
    #[serde(default)]
    pub feather_radius: Option<u32>,
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

impl Scenario {
    /// Parses scenario JSON; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            let field = if path == "." {
                backticked(&message).unwrap_or(".").to_owned()
            } else {
                path
            };
            ScenarioError::Parse { field, message }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads a scenario file. The name defaults to the file stem.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.to_owned(), message: e.to_string() })?;
        let mut scenario = Self::from_json(&text)?;
        if scenario.name.is_none() {
            scenario.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        if let Some(file) = &scenario.mask_file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                scenario.mask_file = Some(base.join(file));
            }
        }
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |field: &str, message: &str| ScenarioError::Invalid { field: field.into(), message: message.into() };
        if self.initial_prompt.trim().is_empty() {
            return Err(invalid("initial_prompt", "must not be empty"));
        }
        if self.target_description.trim().is_empty() {
            return Err(invalid("target_description", "must not be empty"));
        }
        match (&self.mask_seed, &self.mask_file) {
            (Some(_), Some(_)) => Err(invalid("mask_seed", "give either mask_seed or mask_file, not both")),
            (None, None) => Err(invalid("mask_seed", "one of mask_seed or mask_file is required")),
            _ => Ok(()),
        }
    }

    /// `base` with this scenario's backend and feather overrides applied.
    pub fn effective_config(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut config = base.clone();
        let overrides = self.backends.clone().unwrap_or_default();
        let apply = |slot: &mut String, value: Option<String>| {
            if let Some(v) = value {
                *slot = v;
            }
        };
        apply(&mut config.generation_backend, overrides.generation);
        apply(&mut config.inpaint_backend, overrides.inpaint);
        apply(&mut config.segmenter, overrides.segmenter);
        apply(&mut config.refiner, overrides.refiner);
        apply(&mut config.embedder, overrides.embedder);
        if let Some(r) = self.feather_radius {
            config.feather_radius = r;
        }
        config
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.initial_prompt)
    }
}

/// The result of [`Orchestrator::run_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub name: String,
    pub session_id: String,
    pub refined_prompt: String,
    pub report: ScoreReport,
    /// Backend ids actually used; `refiner` is `template` after a fallback.
    pub backends: BackendIds,
    pub initial_image: ArtifactRef,
    pub mask: ArtifactRef,
    pub inpainted_image: ArtifactRef,
    /// [`PipelineConfig::fingerprint`] of the configuration the run used.
    pub config_fingerprint: String,
}

impl Orchestrator {
    /// Runs all five stages for `scenario` in a fresh session.
    pub fn run_scenario(&self, scenario: &Scenario) -> Result<ScenarioOutcome, OrchestratorError> {
        scenario.validate()?;
        let runner = self.for_scenario(scenario)?;

        let record = runner.create_session(NewSession {
            initial_prompt: scenario.initial_prompt.clone(),
            target_description: scenario.target_description.clone(),
            seed: scenario.seed,
            style_hint: scenario.style_hint.clone(),
            width: scenario.width,
            height: scenario.height,
        })?;
        let sid = record.session_id.as_str();

        let mask_input = match (&scenario.mask_seed, &scenario.mask_file) {
            (Some(seed), _) => MaskInput::Seed(seed.clone()),
            (None, Some(path)) => MaskInput::Painted(read_mask(path)?),
            (None, None) => unreachable!("validated above"),
        };

        let lease = runner.lease(sid)?;
        let steps = [
            StageRequest::Generate,
            StageRequest::Mask(mask_input),
            StageRequest::Refine { user_edit: scenario.refined_prompt.clone() },
            StageRequest::Inpaint,
            StageRequest::Score,
        ];
        let mut refiner_id = None;
        for step in steps {
            let stage = step.stage();
            let result = runner.run_stage(&lease, step).map_err(|e| e.in_stage(stage))?;
            if stage == Stage::Refine {
                refiner_id = Some(result.backend_id);
            }
        }
        drop(lease);

        let record = runner.load(sid)?;
        let mut backends = runner.backends.ids();
        if let Some(id) = refiner_id {
            backends.refiner = id;
        }
        let unwrap = |a: Option<ArtifactRef>| a.expect("a scored session has every artifact");
        Ok(ScenarioOutcome {
            name: scenario.display_name().to_owned(),
            session_id: record.session_id.clone(),
            refined_prompt: record.prompts.refined_prompt.clone().expect("refined"),
            report: record.score_report.clone().expect("scored"),
            backends,
            initial_image: unwrap(record.initial_image),
            mask: unwrap(record.mask),
            inpainted_image: unwrap(record.inpainted_image),
            config_fingerprint: runner.config.fingerprint(),
        })
    }

    fn for_scenario(&self, scenario: &Scenario) -> Result<Orchestrator, OrchestratorError> {
        let config = scenario.effective_config(&self.config);
        if config == self.config {
            return Ok(self.clone());
        }
        let backends = Backends::resolve(&config)?;
        Ok(self.with_backends(backends, config))
    }
}

fn read_mask(path: &Path) -> Result<crate::model::BinaryMask, OrchestratorError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ScenarioError::Io { path: path.to_owned(), message: e.to_string() })?;
    codec::decode_mask_png(&bytes).map_err(|e| {
        ScenarioError::Invalid { field: "mask_file".into(), message: e.to_string() }.into()
    })
}
