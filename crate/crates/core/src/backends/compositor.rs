use super::{InpaintRequest, Inpainter, ProceduralGenerator};
use crate::model::RasterImage;
use crate::remote::BackendError;
use crate::segmentation::{feather, FeatherBand};

/// `alpha * patch + (1 - alpha) * original`, rounded half up.
pub fn blend_channel(patch: u8, original: u8, alpha: f64) -> u8 {
    let v = alpha * patch as f64 + (1.0 - alpha) * original as f64;
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Blends `patch` over `original` through the feather band.
pub fn composite(
    original: &RasterImage,
    patch: &RasterImage,
    band: &FeatherBand,
) -> Result<RasterImage, BackendError> {
    for dims in [patch.dims(), band.dims()] {
        if dims != original.dims() {
            return Err(BackendError::DimensionMismatch { expected: original.dims(), actual: dims });
        }
    }
    let pixels = original
        .pixels()
        .iter()
        .zip(patch.pixels())
        .zip(band.alphas())
        .map(|((o, p), &a)| {
            if a == 0.0 {
                *o
            } else {
                [blend_channel(p[0], o[0], a), blend_channel(p[1], o[1], a), blend_channel(p[2], o[2], a)]
            }
        })
        .collect();
    Ok(RasterImage::new(original.width(), original.height(), pixels).expect("same dimensions"))
}

/// Deterministic inpainter: renders the refined prompt procedurally and
/// composites it into the masked region.
#[derive(Debug, Clone, Default)]
pub struct ReferenceInpainter {
    generator: ProceduralGenerator,
}

impl ReferenceInpainter {
    pub fn new(generator: ProceduralGenerator) -> Self {
        Self { generator }
    }
}

impl Inpainter for ReferenceInpainter {
    fn id(&self) -> &str {
        "procedural"
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<RasterImage, BackendError> {
        request.validate()?;
        if request.mask.is_empty() {
            return Ok(request.image.clone());
        }
        let (w, h) = request.image.dims();
        let patch = self.generator.render(&request.refined_prompt, request.seed, w, h);
        composite(&request.image, &patch, &feather(&request.mask, request.feather_radius))
    }
}
