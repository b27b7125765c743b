//! Domain types shared by every stage of the pipeline.

pub mod clock;
pub mod image;
pub mod seed;
pub mod session;

pub use clock::{Clock, FixedClock, SteppingClock, SystemClock};
pub use image::{ArtifactId, BinaryMask, PixelBox, RasterError, RasterImage, Rgb};
pub use seed::{MaskSeed, SeedError, Stroke};
pub use session::{
    legal_events, next_state, transition, validate_session, ArtifactRef, CompletedPass, Event,
    EventKind, HistoryEntry, ImageSize, PromptRecord, ScoreReport, SessionRecord, SessionState,
    Slot, TransitionError, Violation, ViolationCode, TRANSITIONS,
};
