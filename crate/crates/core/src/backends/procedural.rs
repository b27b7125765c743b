use super::{GenerationRequest, ImageGenerator, PaletteMap};
use crate::model::{RasterImage, Rgb};
use crate::remote::BackendError;

/// Per-channel noise bound around the tint color.
pub const NOISE_AMPLITUDE: i32 = 16;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Offline stand-in for a text-to-image model: a seeded hash-noise texture
/// around the palette color of the prompt's first palette keyword.
#[derive(Debug, Clone, Default)]
pub struct ProceduralGenerator {
    palette: PaletteMap,
}

impl ProceduralGenerator {
    pub fn new(palette: PaletteMap) -> Self {
        Self { palette }
    }

    pub fn palette(&self) -> &PaletteMap {
        &self.palette
    }

    /// Renders without the minimum-size rule of [`GenerationRequest`].
    pub fn render(&self, prompt: &str, seed: u64, width: u32, height: u32) -> RasterImage {
        let tint = self.palette.tint_for(prompt);
        let span = (2 * NOISE_AMPLITUDE + 1) as u64;
        let seed_hash = splitmix64(seed);
        RasterImage::from_fn(width, height, |x, y| {
            let h = splitmix64(seed_hash ^ splitmix64(((y as u64) << 32) | x as u64));
            let mut px: Rgb = [0; 3];
            for (c, out) in px.iter_mut().enumerate() {
                let offset = ((h >> (20 * c)) & 0xF_FFFF) % span;
                let v = tint[c] as i32 + offset as i32 - NOISE_AMPLITUDE;
                *out = v.clamp(0, 255) as u8;
            }
            px
        })
        .expect("caller passes non-zero dimensions")
    }
}

impl ImageGenerator for ProceduralGenerator {
    fn id(&self) -> &str {
        "procedural"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RasterImage, BackendError> {
        request.validate()?;
        Ok(self.render(&request.prompt, request.seed, request.width, request.height))
    }
}
