//! Drives sessions through the pipeline.
//!
//! Each stage loads the stored record, checks the transition, calls one
//! backend, writes the produced artifact, and only then writes the updated
//! record. A stage that fails leaves the stored record untouched. At most
//! one stage runs per session at a time, enforced by a [`Lease`].

mod config;
mod scenario;

use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{GenerationRequest, InpaintRequest};
use crate::model::{
    next_state, transition, ArtifactRef, BinaryMask, Clock, Event, EventKind, ImageSize, MaskSeed, PromptRecord,
    RasterImage, ScoreReport, SessionRecord, SessionState, SystemClock, TransitionError,
};
use crate::refinement::{refine_template, sanitize, truncate, RefinementRequest};
use crate::remote::BackendError;
use crate::scoring::{self, ScoreError};
use crate::segmentation::SegmentError;
use crate::store::{ArtifactStore, StoreError};

pub use config::{BackendHealth, BackendIds, Backends, ConfigError, PipelineConfig, ScorePrompt};
pub use scenario::{BackendOverrides, Scenario, ScenarioError, ScenarioOutcome};

const ACTOR: &str = "orchestrator";

/// One pipeline step, named after the action rather than the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate,
    Mask,
    Refine,
    Inpaint,
    Score,
    Restart,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Generate, Stage::Mask, Stage::Refine, Stage::Inpaint, Stage::Score, Stage::Restart];

    pub fn event(self) -> EventKind {
        match self {
            Stage::Generate => EventKind::ImageGenerated,
            Stage::Mask => EventKind::MaskSet,
            Stage::Refine => EventKind::PromptRefined,
            Stage::Inpaint => EventKind::Inpainted,
            Stage::Score => EventKind::Scored,
            Stage::Restart => EventKind::RestartMask,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Mask => "mask",
            Stage::Refine => "refine",
            Stage::Inpaint => "inpaint",
            Stage::Score => "score",
            Stage::Restart => "restart",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a mask comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskInput {
    /// A gesture, routed through the configured segmenter.
    Seed(MaskSeed),
    /// A mask painted by the user, used as is.
    Painted(BinaryMask),
}

/// A stage together with its input.
#[derive(Debug, Clone, PartialEq)]
pub enum StageRequest {
    Generate,
    Mask(MaskInput),
    Refine { user_edit: Option<String> },
    Inpaint,
    Score,
    Restart,
}

impl StageRequest {
    pub fn stage(&self) -> Stage {
        match self {
            StageRequest::Generate => Stage::Generate,
            StageRequest::Mask(_) => Stage::Mask,
            StageRequest::Refine { .. } => Stage::Refine,
            StageRequest::Inpaint => Stage::Inpaint,
            StageRequest::Score => Stage::Score,
            StageRequest::Restart => Stage::Restart,
        }
    }
}

/// What a completed stage produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub session_id: String,
    pub stage: Stage,
    /// Session state after the stage.
    pub state: SessionState,
    /// Image or mask artifacts written by the stage.
    pub artifacts: Vec<ArtifactRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refined_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_report: Option<ScoreReport>,
    pub duration_ms: u64,
    pub backend_id: String,
}

/// Coarse classification used for HTTP statuses and exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    NotFound,
    IllegalTransition,
    SessionBusy,
    Validation,
    BackendUnavailable,
    Storage,
    Config,
    Parse,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestratorError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("session {0} already has a stage in flight")]
    SessionBusy(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{stage} backend failed: {source}")]
    Backend { stage: Stage, source: BackendError },
    #[error("storage failure: {0}")]
    Storage(StoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("stage {stage} failed: {source}")]
    Stage { stage: Stage, source: Box<OrchestratorError> },
}

impl From<StoreError> for OrchestratorError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => OrchestratorError::NotFound(id),
            StoreError::InvalidId(id) => OrchestratorError::NotFound(id),
            other => OrchestratorError::Storage(other),
        }
    }
}

impl OrchestratorError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            OrchestratorError::NotFound(_) => ErrorKind::NotFound,
            OrchestratorError::Transition(TransitionError::IllegalTransition { .. }) => ErrorKind::IllegalTransition,
            OrchestratorError::Transition(TransitionError::InvalidPayload(_)) => ErrorKind::Validation,
            OrchestratorError::SessionBusy(_) => ErrorKind::SessionBusy,
            OrchestratorError::Validation(_) => ErrorKind::Validation,
            OrchestratorError::Backend { .. } => ErrorKind::BackendUnavailable,
            OrchestratorError::Storage(_) => ErrorKind::Storage,
            OrchestratorError::Config(_) => ErrorKind::Config,
            OrchestratorError::Scenario(ScenarioError::Invalid { .. }) => ErrorKind::Validation,
            OrchestratorError::Scenario(_) => ErrorKind::Parse,
            OrchestratorError::Stage { source, .. } => source.kind(),
        }
    }

    /// The stage the error is attributed to, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            OrchestratorError::Stage { stage, .. } | OrchestratorError::Backend { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    fn in_stage(self, stage: Stage) -> Self {
        match self {
            already @ OrchestratorError::Stage { .. } => already,
            other => OrchestratorError::Stage { stage, source: Box::new(other) },
        }
    }
}

fn backend(stage: Stage) -> impl FnOnce(BackendError) -> OrchestratorError {
    move |source| OrchestratorError::Backend { stage, source }
}

fn segment_error(e: SegmentError) -> OrchestratorError {
    match e {
        SegmentError::Backend(source) => OrchestratorError::Backend { stage: Stage::Mask, source },
        other => OrchestratorError::Validation(other.to_string()),
    }
}

fn score_error(e: ScoreError) -> OrchestratorError {
    let source = match e {
        ScoreError::Backend(b) => b,
        other => BackendError::Malformed(other.to_string()),
    };
    OrchestratorError::Backend { stage: Stage::Score, source }
}

/// Exclusive right to run stages on one session. Released on drop.
#[derive(Debug)]
pub struct Lease {
    session_id: String,
    held: Arc<Mutex<HashSet<String>>>,
}

impl Lease {
    pub fn session_id(&self) -> &str {
        &self.session_id
    }
}

impl Drop for Lease {
    fn drop(&mut self) {
        self.held.lock().unwrap().remove(&self.session_id);
    }
}

/// Inputs for a new session.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSession {
    pub initial_prompt: String,
    pub target_description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub style_hint: Option<String>,
    /// Overrides the configured image size.
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
}

impl NewSession {
    pub fn new(initial_prompt: impl Into<String>, target_description: impl Into<String>, seed: u64) -> Self {
        Self {
            initial_prompt: initial_prompt.into(),
            target_description: target_description.into(),
            seed,
            ..Default::default()
        }
    }
}

/// Which stored image to fetch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageSlot {
    Initial,
    Mask,
    Inpainted,
}

/// Runs pipeline stages against an [`ArtifactStore`].
#[derive(Clone)]
pub struct Orchestrator {
    store: ArtifactStore,
    backends: Backends,
    config: PipelineConfig,
    clock: Arc<dyn Clock>,
    leases: Arc<Mutex<HashSet<String>>>,
}

impl fmt::Debug for Orchestrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Orchestrator")
            .field("root", &self.store.root())
            .field("backends", &self.backends)
            .finish()
    }
}

impl Orchestrator {
    /// Resolves the configured backends and opens the store at
    /// `config.artifact_root`.
    pub fn from_config(config: PipelineConfig) -> Result<Self, OrchestratorError> {
        let backends = Backends::resolve(&config)?;
        let store = ArtifactStore::open(&config.artifact_root)?;
        Ok(Self::new(store, backends, config))
    }

    pub fn new(store: ArtifactStore, backends: Backends, config: PipelineConfig) -> Self {
        Self { store, backends, config, clock: Arc::new(SystemClock), leases: Arc::default() }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn store(&self) -> &ArtifactStore {
        &self.store
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// A copy sharing store, clock and leases but using other backends.
    pub fn with_backends(&self, backends: Backends, config: PipelineConfig) -> Self {
        Self { backends, config, ..self.clone() }
    }

    pub fn create_session(&self, new: NewSession) -> Result<SessionRecord, OrchestratorError> {
        if new.initial_prompt.trim().is_empty() {
            return Err(OrchestratorError::Validation("initial prompt is empty".into()));
        }
        if new.target_description.trim().is_empty() {
            return Err(OrchestratorError::Validation("target description is empty".into()));
        }
        let size = ImageSize {
            width: new.width.unwrap_or(self.config.image_width),
            height: new.height.unwrap_or(self.config.image_height),
        };
        let min = crate::backends::MIN_GENERATED_SIDE;
        if size.width < min || size.height < min {
            return Err(OrchestratorError::Validation(format!(
                "image size {}x{} is below {min}",
                size.width, size.height
            )));
        }
        let mut prompts = PromptRecord::new(new.initial_prompt, new.target_description);
        prompts.style_hint = new.style_hint.filter(|s| !s.trim().is_empty());
        let id = uuid::Uuid::new_v4().to_string();
        let record = SessionRecord::new(id, prompts, new.seed, size, self.clock.as_ref());
        self.store.save_record(&record)?;
        Ok(record)
    }

    pub fn load(&self, session_id: &str) -> Result<SessionRecord, OrchestratorError> {
        Ok(self.store.load_record(session_id)?)
    }

    pub fn list_sessions(&self) -> Result<Vec<SessionRecord>, OrchestratorError> {
        Ok(self.store.list_sessions()?)
    }

    /// PNG bytes of one of the session's current images.
    pub fn image_png(&self, session_id: &str, slot: ImageSlot) -> Result<Vec<u8>, OrchestratorError> {
        let record = self.load(session_id)?;
        let aref = match slot {
            ImageSlot::Initial => record.initial_image,
            ImageSlot::Mask => record.mask,
            ImageSlot::Inpainted => record.inpainted_image,
        }
        .ok_or_else(|| OrchestratorError::NotFound(format!("{session_id} has no {slot:?} image")))?;
        Ok(self.store.png_bytes(session_id, &aref.id)?)
    }

    /// Takes the session's lease.
    pub fn lease(&self, session_id: &str) -> Result<Lease, OrchestratorError> {
        let mut held = self.leases.lock().unwrap();
        if !held.insert(session_id.to_owned()) {
            return Err(OrchestratorError::SessionBusy(session_id.to_owned()));
        }
        Ok(Lease { session_id: session_id.to_owned(), held: self.leases.clone() })
    }

    /// Takes the lease and checks that `stage` is legal right now.
    ///
    /// Lets a caller reject a request up front before running the stage
    /// elsewhere with [`Orchestrator::run_stage`].
    pub fn begin(&self, session_id: &str, stage: Stage) -> Result<Lease, OrchestratorError> {
        let record = self.load(session_id)?;
        let lease = self.lease(session_id)?;
        if next_state(record.state, stage.event()).is_none() {
            return Err(TransitionError::IllegalTransition { state: record.state, event: stage.event() }.into());
        }
        Ok(lease)
    }

    /// Runs one stage under an already-held lease.
    pub fn run_stage(&self, lease: &Lease, request: StageRequest) -> Result<StageResult, OrchestratorError> {
        let started = Instant::now();
        let session_id = lease.session_id();
        let stage = request.stage();
        let record = self.load(session_id)?;
        if next_state(record.state, stage.event()).is_none() {
            return Err(TransitionError::IllegalTransition { state: record.state, event: stage.event() }.into());
        }

        let mut out = StageResult {
            session_id: session_id.to_owned(),
            stage,
            state: record.state,
            artifacts: Vec::new(),
            refined_prompt: None,
            score_report: None,
            duration_ms: 0,
            backend_id: String::new(),
        };
        let event = match request {
            StageRequest::Generate => self.generate(&record, &mut out)?,
            StageRequest::Mask(input) => self.mask(&record, input, &mut out)?,
            StageRequest::Refine { user_edit } => self.refine(&record, user_edit, &mut out)?,
            StageRequest::Inpaint => self.inpaint(&record, &mut out)?,
            StageRequest::Score => self.score(&record, &mut out)?,
            StageRequest::Restart => Event::RestartMask,
        };
        let next = transition(&record, event, ACTOR, self.clock.as_ref())?;
        self.store.save_record(&next)?;
        out.state = next.state;
        out.duration_ms = started.elapsed().as_millis() as u64;
        Ok(out)
    }

    fn run(&self, session_id: &str, request: StageRequest) -> Result<StageResult, OrchestratorError> {
        let lease = self.lease(session_id)?;
        self.run_stage(&lease, request)
    }

    pub fn run_generate(&self, session_id: &str) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Generate)
    }

    pub fn run_mask(&self, session_id: &str, input: MaskInput) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Mask(input))
    }

    pub fn run_refine(&self, session_id: &str, user_edit: Option<String>) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Refine { user_edit })
    }

    pub fn run_inpaint(&self, session_id: &str) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Inpaint)
    }

    pub fn run_score(&self, session_id: &str) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Score)
    }

    /// Archives the finished pass and returns to `Masked` for another one.
    pub fn restart_mask(&self, session_id: &str) -> Result<StageResult, OrchestratorError> {
        self.run(session_id, StageRequest::Restart)
    }

    fn expect_dims(&self, record: &SessionRecord, stage: Stage, actual: (u32, u32)) -> Result<(), OrchestratorError> {
        let expected = (record.image_size.width, record.image_size.height);
        if actual != expected {
            return Err(OrchestratorError::Backend { stage, source: BackendError::DimensionMismatch { expected, actual } });
        }
        Ok(())
    }

    fn initial_image(&self, record: &SessionRecord) -> Result<RasterImage, OrchestratorError> {
        let aref = record.initial_image.as_ref().ok_or_else(|| missing("initial image"))?;
        Ok(self.store.get_image(&record.session_id, aref)?)
    }

    fn generate(&self, record: &SessionRecord, out: &mut StageResult) -> Result<Event, OrchestratorError> {
        let size = record.image_size;
        let request = GenerationRequest::new(record.prompts.initial_prompt.clone(), record.seed, size.width, size.height)
            .map_err(|e| OrchestratorError::Validation(e.to_string()))?;
        let image = self.backends.generator.generate(&request).map_err(backend(Stage::Generate))?;
        self.expect_dims(record, Stage::Generate, image.dims())?;
        let aref = self.store.put_image(&record.session_id, &image)?;
        out.artifacts.push(aref.clone());
        out.backend_id = self.backends.generator.id().to_owned();
        Ok(Event::ImageGenerated { image: aref })
    }

    fn mask(&self, record: &SessionRecord, input: MaskInput, out: &mut StageResult) -> Result<Event, OrchestratorError> {
        let (mask, seed) = match input {
            MaskInput::Seed(seed) => {
                let image = self.initial_image(record)?;
                seed.validate(image.dims()).map_err(|e| OrchestratorError::Validation(e.to_string()))?;
                let mask = self.backends.segmenter.segment(&image, &seed).map_err(segment_error)?;
                self.expect_dims(record, Stage::Mask, mask.dims())?;
                out.backend_id = self.backends.segmenter.id().to_owned();
                (mask, Some(seed))
            }
            MaskInput::Painted(mask) => {
                let expected = (record.image_size.width, record.image_size.height);
                if mask.dims() != expected {
                    return Err(OrchestratorError::Validation(format!(
                        "painted mask is {}x{} but the image is {}x{}",
                        mask.width(),
                        mask.height(),
                        expected.0,
                        expected.1
                    )));
                }
                out.backend_id = "painted".into();
                (mask, None)
            }
        };
        let aref = self.store.put_mask(&record.session_id, &mask)?;
        out.artifacts.push(aref.clone());
        Ok(Event::MaskSet { mask: aref, seed })
    }

    fn refine(&self, record: &SessionRecord, user_edit: Option<String>, out: &mut StageResult) -> Result<Event, OrchestratorError> {
        let request = RefinementRequest {
            initial_prompt: record.prompts.initial_prompt.clone(),
            target_description: record.prompts.target_description.clone(),
            style_hint: record.prompts.style_hint.clone(),
        };
        let refiner = &self.backends.refiner;
        let (suggestion, refiner_id) = match refiner.refine(&request) {
            Ok(s) => (s, refiner.id().to_owned()),
            Err(e) => {
                log::warn!("refiner {} failed ({e}); using the template", refiner.id());
                (refine_template(&request), "template".to_owned())
            }
        };
        let refined = match user_edit {
            Some(edit) => {
                let edit = truncate(&sanitize(&edit));
                if edit.is_empty() {
                    return Err(OrchestratorError::Validation("user edit is empty".into()));
                }
                edit
            }
            None => suggestion.clone(),
        };
        out.refined_prompt = Some(refined.clone());
        out.backend_id = refiner_id.clone();
        Ok(Event::PromptRefined { suggestion, refined, refiner_id })
    }

    fn inpaint(&self, record: &SessionRecord, out: &mut StageResult) -> Result<Event, OrchestratorError> {
        let image = self.initial_image(record)?;
        let mask_ref = record.mask.as_ref().ok_or_else(|| missing("mask"))?;
        let mask = self.store.get_mask(&record.session_id, mask_ref)?;
        let prompt = record.prompts.refined_prompt.clone().ok_or_else(|| missing("refined prompt"))?;
        let request = InpaintRequest::new(image, mask, prompt, record.seed).with_feather_radius(self.config.feather_radius);
        let result = self.backends.inpainter.inpaint(&request).map_err(backend(Stage::Inpaint))?;
        self.expect_dims(record, Stage::Inpaint, result.dims())?;
        let aref = self.store.put_image(&record.session_id, &result)?;
        out.artifacts.push(aref.clone());
        out.backend_id = self.backends.inpainter.id().to_owned();
        Ok(Event::Inpainted { image: aref })
    }

    fn score(&self, record: &SessionRecord, out: &mut StageResult) -> Result<Event, OrchestratorError> {
        let initial = self.initial_image(record)?;
        let inpainted_ref = record.inpainted_image.as_ref().ok_or_else(|| missing("inpainted image"))?;
        let inpainted = self.store.get_image(&record.session_id, inpainted_ref)?;
        let prompt = match self.config.score_against {
            ScorePrompt::Initial => record.prompts.initial_prompt.as_str(),
            ScorePrompt::Refined => record.prompts.refined_prompt.as_deref().ok_or_else(|| missing("refined prompt"))?,
        };
        let report = scoring::compare(&initial, &inpainted, prompt, self.backends.embedder.as_ref()).map_err(score_error)?;
        out.score_report = Some(report.clone());
        out.backend_id = self.backends.embedder.id().to_owned();
        Ok(Event::Scored { report })
    }
}

fn missing(what: &str) -> OrchestratorError {
    OrchestratorError::Validation(format!("session has no {what}"))
}
