//! Text-to-image and inpainting backends.
//!
//! Every inpainter, local or remote, satisfies the same observable
//! contract: pixels outside `dilate(mask, feather_radius)` come back
//! bit-identical, pixels deep inside the mask come from the new content,
//! and the boundary band is alpha-blended. Remote inpainters are forced
//! into that contract by compositing their output locally.

mod compositor;
mod palette;
mod procedural;
mod remote;

use crate::model::{BinaryMask, RasterImage};
use crate::remote::BackendError;

pub use compositor::{blend_channel, composite, ReferenceInpainter};
pub use palette::{words, PaletteError, PaletteMap};
pub use procedural::{ProceduralGenerator, NOISE_AMPLITUDE};
pub use remote::{HttpGenerator, HttpInpainter};

pub const MIN_GENERATED_SIDE: u32 = 16;
pub const DEFAULT_FEATHER_RADIUS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, seed: u64, width: u32, height: u32) -> Result<Self, BackendError> {
        let req = Self { prompt: prompt.into(), seed, width, height };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if self.width < MIN_GENERATED_SIDE || self.height < MIN_GENERATED_SIDE {
            return Err(BackendError::InvalidRequest(format!(
                "requested {}x{}; both sides must be at least {MIN_GENERATED_SIDE}",
                self.width, self.height
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintRequest {
    pub image: RasterImage,
    pub mask: BinaryMask,
    pub refined_prompt: String,
    pub seed: u64,
    pub feather_radius: u32,
}

impl InpaintRequest {
    pub fn new(image: RasterImage, mask: BinaryMask, refined_prompt: impl Into<String>, seed: u64) -> Self {
        Self { image, mask, refined_prompt: refined_prompt.into(), seed, feather_radius: DEFAULT_FEATHER_RADIUS }
    }

    pub fn with_feather_radius(mut self, radius: u32) -> Self {
        self.feather_radius = radius;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.mask.dims() != self.image.dims() {
            return Err(BackendError::DimensionMismatch {
                expected: self.image.dims(),
                actual: self.mask.dims(),
            });
        }
        if self.refined_prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("refined prompt is empty".into()));
        }
        Ok(())
    }
}

pub trait ImageGenerator: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<RasterImage, BackendError>;
    fn probe(&self) -> bool {
        true
    }
}

pub trait Inpainter: Send + Sync {
    fn id(&self) -> &str;
    fn inpaint(&self, request: &InpaintRequest) -> Result<RasterImage, BackendError>;
    fn probe(&self) -> bool {
        true
    }
}
