//! Session records and the correction-workflow state machine.
//!
//! A session moves through `Created → Generated → Masked → Refined →
//! Inpainted → Scored`. The user may re-mask while still `Masked`, and may
//! start another correction pass from `Scored` with `RestartMask`. Every
//! transition appends to an append-only history; nothing is ever removed.
//!
//! Records hold [`ArtifactRef`]s (content digest plus dimensions) rather
//! than pixel data. Pixels live in the artifact store.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::clock::Clock;
use super::image::{ArtifactId, BinaryMask, RasterImage};
use super::seed::MaskSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SessionState {
    Created,
    Generated,
    Masked,
    Refined,
    Inpainted,
    Scored,
}

impl SessionState {
    pub const ALL: [SessionState; 6] = [
        SessionState::Created,
        SessionState::Generated,
        SessionState::Masked,
        SessionState::Refined,
        SessionState::Inpainted,
        SessionState::Scored,
    ];
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ImageGenerated,
    MaskSet,
    PromptRefined,
    Inpainted,
    Scored,
    RestartMask,
}

impl EventKind {
    pub const ALL: [EventKind; 6] = [
        EventKind::ImageGenerated,
        EventKind::MaskSet,
        EventKind::PromptRefined,
        EventKind::Inpainted,
        EventKind::Scored,
        EventKind::RestartMask,
    ];
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The complete legal transition relation.
pub const TRANSITIONS: [(SessionState, EventKind, SessionState); 7] = [
    (SessionState::Created, EventKind::ImageGenerated, SessionState::Generated),
    (SessionState::Generated, EventKind::MaskSet, SessionState::Masked),
    (SessionState::Masked, EventKind::MaskSet, SessionState::Masked),
    (SessionState::Masked, EventKind::PromptRefined, SessionState::Refined),
    (SessionState::Refined, EventKind::Inpainted, SessionState::Inpainted),
    (SessionState::Inpainted, EventKind::Scored, SessionState::Scored),
    (SessionState::Scored, EventKind::RestartMask, SessionState::Masked),
];

pub fn next_state(state: SessionState, event: EventKind) -> Option<SessionState> {
    TRANSITIONS
        .iter()
        .find(|(from, ev, _)| *from == state && *ev == event)
        .map(|&(_, _, to)| to)
}

/// Events legal from `state`, in table order.
pub fn legal_events(state: SessionState) -> Vec<EventKind> {
    TRANSITIONS.iter().filter(|(from, _, _)| *from == state).map(|&(_, ev, _)| ev).collect()
}

/// Pointer to a stored image or mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub id: ArtifactId,
    pub width: u32,
    pub height: u32,
}

impl ArtifactRef {
    pub fn of_image(image: &RasterImage) -> Self {
        Self { id: image.digest(), width: image.width(), height: image.height() }
    }

    pub fn of_mask(mask: &BinaryMask) -> Self {
        Self { id: mask.digest(), width: mask.width(), height: mask.height() }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub initial_prompt: String,
    pub target_description: String,
    #[serde(default)]
    pub style_hint: Option<String>,
    /// What the refiner proposed.
    #[serde(default)]
    pub suggested_prompt: Option<String>,
    /// What inpainting actually used: the suggestion or the user's edit of it.
    #[serde(default)]
    pub refined_prompt: Option<String>,
    #[serde(default)]
    pub refiner_id: Option<String>,
}

impl PromptRecord {
    pub fn new(initial_prompt: impl Into<String>, target_description: impl Into<String>) -> Self {
        Self {
            initial_prompt: initial_prompt.into(),
            target_description: target_description.into(),
            style_hint: None,
            suggested_prompt: None,
            refined_prompt: None,
            refiner_id: None,
        }
    }
}

/// Initial-versus-inpainted similarity comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub prompt_used: String,
    pub initial_score: f64,
    pub inpainted_score: f64,
    pub delta: f64,
    pub embedder_id: String,
}

impl ScoreReport {
    pub fn new(
        prompt_used: impl Into<String>,
        initial_score: f64,
        inpainted_score: f64,
        embedder_id: impl Into<String>,
    ) -> Self {
        Self {
            prompt_used: prompt_used.into(),
            initial_score,
            inpainted_score,
            delta: inpainted_score - initial_score,
            embedder_id: embedder_id.into(),
        }
    }

    pub fn is_consistent(&self) -> bool {
        let in_range = |s: f64| s.is_finite() && s >= 0.0;
        in_range(self.initial_score)
            && in_range(self.inpainted_score)
            && self.delta == self.inpainted_score - self.initial_score
    }
}

/// A finished correction pass, archived when the user restarts masking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletedPass {
    pub mask: ArtifactRef,
    pub mask_seed: Option<MaskSeed>,
    pub suggested_prompt: Option<String>,
    pub refined_prompt: String,
    pub refiner_id: Option<String>,
    pub inpainted_image: ArtifactRef,
    pub score_report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub at: DateTime<Utc>,
    pub from: SessionState,
    pub to: SessionState,
    pub event: EventKind,
    pub actor: String,
    /// Artifact produced by this step, if any.
    #[serde(default)]
    pub artifact: Option<ArtifactId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub state: SessionState,
    pub prompts: PromptRecord,
    pub seed: u64,
    pub image_size: ImageSize,
    pub initial_image: Option<ArtifactRef>,
    pub mask: Option<ArtifactRef>,
    pub mask_seed: Option<MaskSeed>,
    pub inpainted_image: Option<ArtifactRef>,
    pub score_report: Option<ScoreReport>,
    #[serde(default)]
    pub passes: Vec<CompletedPass>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub history: Vec<HistoryEntry>,
}

impl SessionRecord {
    /// A fresh record in state `Created`.
    pub fn new(
        session_id: impl Into<String>,
        prompts: PromptRecord,
        seed: u64,
        image_size: ImageSize,
        clock: &dyn Clock,
    ) -> Self {
        let now = clock.now();
        Self {
            session_id: session_id.into(),
            state: SessionState::Created,
            prompts,
            seed,
            image_size,
            initial_image: None,
            mask: None,
            mask_seed: None,
            inpainted_image: None,
            score_report: None,
            passes: Vec::new(),
            created_at: now,
            updated_at: now,
            history: Vec::new(),
        }
    }

    /// Every artifact this record points at, including archived passes.
    pub fn artifact_refs(&self) -> Vec<&ArtifactRef> {
        let current = [&self.initial_image, &self.mask, &self.inpainted_image];
        let mut refs: Vec<&ArtifactRef> = current.into_iter().flatten().collect();
        for pass in &self.passes {
            refs.push(&pass.mask);
            refs.push(&pass.inpainted_image);
        }
        refs
    }
}

/// Record slot named by a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    InitialImage,
    Mask,
    RefinedPrompt,
    InpaintedImage,
    ScoreReport,
    InitialPrompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", content = "slot")]
pub enum ViolationCode {
    MissingArtifact(Slot),
    DimensionMismatch(Slot),
    EmptyPrompt(Slot),
    InconsistentScore,
    InvalidHistory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Returns every invariant violation in `record`; empty means valid.
pub fn validate_session(record: &SessionRecord) -> Vec<Violation> {
    use SessionState::*;
    let mut out = Vec::new();
    let reached = |s: SessionState| record.state >= s;

    if record.prompts.initial_prompt.trim().is_empty() {
        out.push(Violation::new(
            ViolationCode::EmptyPrompt(Slot::InitialPrompt),
            "initial prompt is empty",
        ));
    }
    if let Some(refined) = &record.prompts.refined_prompt {
        if refined.trim().is_empty() {
            out.push(Violation::new(
                ViolationCode::EmptyPrompt(Slot::RefinedPrompt),
                "refined prompt is present but empty",
            ));
        }
    }

    let mut require = |present: bool, stage: SessionState, slot: Slot| {
        if reached(stage) && !present {
            out.push(Violation::new(
                ViolationCode::MissingArtifact(slot),
                format!("state {} requires {slot:?}", record.state),
            ));
        }
    };
    require(record.initial_image.is_some(), Generated, Slot::InitialImage);
    require(record.mask.is_some(), Masked, Slot::Mask);
    require(record.prompts.refined_prompt.is_some(), Refined, Slot::RefinedPrompt);
    require(record.inpainted_image.is_some(), Inpainted, Slot::InpaintedImage);
    require(record.score_report.is_some(), Scored, Slot::ScoreReport);

    let size = (record.image_size.width, record.image_size.height);
    let mut check_dims = |artifact: Option<&ArtifactRef>, slot: Slot| {
        if let Some(a) = artifact {
            if a.dims() != size {
                out.push(Violation::new(
                    ViolationCode::DimensionMismatch(slot),
                    format!(
                        "{slot:?} is {}x{} but the session image is {}x{}",
                        a.width, a.height, size.0, size.1
                    ),
                ));
            }
        }
    };
    check_dims(record.initial_image.as_ref(), Slot::InitialImage);
    check_dims(record.mask.as_ref(), Slot::Mask);
    check_dims(record.inpainted_image.as_ref(), Slot::InpaintedImage);
    for pass in &record.passes {
        check_dims(Some(&pass.mask), Slot::Mask);
        check_dims(Some(&pass.inpainted_image), Slot::InpaintedImage);
    }

    let reports = record.score_report.iter().chain(record.passes.iter().map(|p| &p.score_report));
    for report in reports {
        if !report.is_consistent() {
            out.push(Violation::new(
                ViolationCode::InconsistentScore,
                "score report delta or scores are inconsistent",
            ));
        }
    }

    if let Some(msg) = history_problem(record) {
        out.push(Violation::new(ViolationCode::InvalidHistory, msg));
    }
    out
}

fn history_problem(record: &SessionRecord) -> Option<String> {
    let mut at = SessionState::Created;
    for (i, entry) in record.history.iter().enumerate() {
        if entry.from != at {
            return Some(format!("history entry {i} starts at {} but the path is at {at}", entry.from));
        }
        if next_state(entry.from, entry.event) != Some(entry.to) {
            return Some(format!(
                "history entry {i} ({} --{}--> {}) is not a legal transition",
                entry.from, entry.event, entry.to
            ));
        }
        at = entry.to;
    }
    (at != record.state).then(|| format!("history ends at {at} but state is {}", record.state))
}

/// Payload-carrying transition event.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    ImageGenerated { image: ArtifactRef },
    MaskSet { mask: ArtifactRef, seed: Option<MaskSeed> },
    PromptRefined { suggestion: String, refined: String, refiner_id: String },
    Inpainted { image: ArtifactRef },
    Scored { report: ScoreReport },
    RestartMask,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::ImageGenerated { .. } => EventKind::ImageGenerated,
            Event::MaskSet { .. } => EventKind::MaskSet,
            Event::PromptRefined { .. } => EventKind::PromptRefined,
            Event::Inpainted { .. } => EventKind::Inpainted,
            Event::Scored { .. } => EventKind::Scored,
            Event::RestartMask => EventKind::RestartMask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransitionError {
    #[error("event {event} is not allowed in state {state}")]
    IllegalTransition { state: SessionState, event: EventKind },
    #[error("transition would produce an invalid record: {}", join_violations(.0))]
    InvalidPayload(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.message.as_str()).collect::<Vec<_>>().join("; ")
}

/// Applies `event` to `record`, returning the successor record.
///
/// The input is never modified. The output always passes
/// [`validate_session`]; payloads that would break an invariant are
/// rejected with [`TransitionError::InvalidPayload`].
pub fn transition(
    record: &SessionRecord,
    event: Event,
    actor: &str,
    clock: &dyn Clock,
) -> Result<SessionRecord, TransitionError> {
    let kind = event.kind();
    let to = next_state(record.state, kind)
        .ok_or(TransitionError::IllegalTransition { state: record.state, event: kind })?;

    let mut next = record.clone();
    let artifact = match event {
        Event::ImageGenerated { image } => {
            let id = image.id.clone();
            next.initial_image = Some(image);
            Some(id)
        }
        Event::MaskSet { mask, seed } => {
            let id = mask.id.clone();
            next.mask = Some(mask);
            next.mask_seed = seed;
            Some(id)
        }
        Event::PromptRefined { suggestion, refined, refiner_id } => {
            next.prompts.suggested_prompt = Some(suggestion);
            next.prompts.refined_prompt = Some(refined);
            next.prompts.refiner_id = Some(refiner_id);
            None
        }
        Event::Inpainted { image } => {
            let id = image.id.clone();
            next.inpainted_image = Some(image);
            Some(id)
        }
        Event::Scored { report } => {
            next.score_report = Some(report);
            None
        }
        Event::RestartMask => {
            archive_pass(&mut next);
            None
        }
    };

    next.state = to;
    next.updated_at = clock.now();
    next.history.push(HistoryEntry {
        at: next.updated_at,
        from: record.state,
        to,
        event: kind,
        actor: actor.to_owned(),
        artifact,
    });

    let violations = validate_session(&next);
    if violations.is_empty() {
        Ok(next)
    } else {
        Err(TransitionError::InvalidPayload(violations))
    }
}

// Moves the finished pass into `passes`; the current mask stays in place.
fn archive_pass(record: &mut SessionRecord) {
    let prompts = &mut record.prompts;
    let refined = prompts.refined_prompt.take();
    let suggested = prompts.suggested_prompt.take();
    let refiner_id = prompts.refiner_id.take();
    let inpainted = record.inpainted_image.take();
    let report = record.score_report.take();
    if let (Some(mask), Some(refined_prompt), Some(inpainted_image), Some(score_report)) =
        (record.mask.clone(), refined, inpainted, report)
    {
        record.passes.push(CompletedPass {
            mask,
            mask_seed: record.mask_seed.clone(),
            suggested_prompt: suggested,
            refined_prompt,
            refiner_id,
            inpainted_image,
            score_report,
        });
    }
}
