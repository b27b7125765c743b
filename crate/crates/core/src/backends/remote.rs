use serde::{Deserialize, Serialize};

use super::{composite, GenerationRequest, ImageGenerator, InpaintRequest, Inpainter};
use crate::codec;
use crate::model::RasterImage;
use crate::remote::{BackendError, Endpoint};
use crate::segmentation::feather;

#[derive(Serialize)]
struct GenerateBody<'a> {
    prompt: &'a str,
    seed: u64,
    width: u32,
    height: u32,
}

#[derive(Serialize)]
struct InpaintBody<'a> {
    image: String,
    mask: String,
    prompt: &'a str,
    seed: u64,
}

#[derive(Deserialize)]
struct ImageBody {
    image: String,
}

fn decode_image(body: ImageBody, expected: (u32, u32)) -> Result<RasterImage, BackendError> {
    let bytes = codec::from_base64(&body.image).map_err(|e| BackendError::Malformed(e.to_string()))?;
    let image = codec::decode_png(&bytes).map_err(|e| BackendError::Malformed(e.to_string()))?;
    if image.dims() != expected {
        return Err(BackendError::Malformed(format!(
            "expected a {}x{} image, got {}x{}",
            expected.0,
            expected.1,
            image.width(),
            image.height()
        )));
    }
    Ok(image)
}

/// `POST {prompt, seed, width, height}` → `{image: base64 PNG}`.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: Endpoint,
    id: String,
}

impl HttpGenerator {
    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url());
        Self { endpoint, id }
    }
}

impl ImageGenerator for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RasterImage, BackendError> {
        request.validate()?;
        let body = GenerateBody {
            prompt: &request.prompt,
            seed: request.seed,
            width: request.width,
            height: request.height,
        };
        decode_image(self.endpoint.post_json(&body)?, (request.width, request.height))
    }

    fn probe(&self) -> bool {
        self.endpoint.probe()
    }
}

/// `POST {image, mask, prompt, seed}` → `{image}`.
///
/// The returned image is only trusted inside the feather band: it is
/// composited over the original locally, so everything outside
/// `dilate(mask, feather_radius)` is preserved whatever the service sends.
#[derive(Debug, Clone)]
pub struct HttpInpainter {
    endpoint: Endpoint,
    id: String,
}

impl HttpInpainter {
    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url());
        Self { endpoint, id }
    }
}

impl Inpainter for HttpInpainter {
    fn id(&self) -> &str {
        &self.id
    }

    fn inpaint(&self, request: &InpaintRequest) -> Result<RasterImage, BackendError> {
        request.validate()?;
        if request.mask.is_empty() {
            return Ok(request.image.clone());
        }
        let body = InpaintBody {
            image: codec::to_base64(&codec::encode_png(&request.image)),
            mask: codec::to_base64(&codec::encode_mask_png(&request.mask)),
            prompt: &request.refined_prompt,
            seed: request.seed,
        };
        let generated = decode_image(self.endpoint.post_json(&body)?, request.image.dims())?;
        composite(&request.image, &generated, &feather(&request.mask, request.feather_radius))
    }

    fn probe(&self) -> bool {
        self.endpoint.probe()
    }
}
