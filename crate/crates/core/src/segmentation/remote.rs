use serde::{Deserialize, Serialize};

use super::{SegmentError, Segmenter};
use crate::codec;
use crate::model::{BinaryMask, MaskSeed, RasterImage};
use crate::remote::{BackendError, Endpoint};

#[derive(Serialize)]
struct SegmentRequest<'a> {
    image: String,
    seed: &'a MaskSeed,
}

#[derive(Deserialize)]
struct SegmentResponse {
    mask: String,
}

/// Adapter for an external point/box-prompted segmentation service.
///
/// The service receives `{image: base64 PNG, seed}` and must answer with
/// `{mask: base64 single-channel PNG}` at the image's dimensions.
#[derive(Debug, Clone)]
pub struct HttpSegmenter {
    endpoint: Endpoint,
    id: String,
}

impl HttpSegmenter {
    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url());
        Self { endpoint, id }
    }
}

impl Segmenter for HttpSegmenter {
    fn id(&self) -> &str {
        &self.id
    }

    fn segment(&self, image: &RasterImage, seed: &MaskSeed) -> Result<BinaryMask, SegmentError> {
        seed.validate(image.dims())?;
        let request = SegmentRequest { image: codec::to_base64(&codec::encode_png(image)), seed };
        let response: SegmentResponse = self.endpoint.post_json(&request)?;
        let bytes = codec::from_base64(&response.mask)
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        let mask =
            codec::decode_mask_png(&bytes).map_err(|e| BackendError::Malformed(e.to_string()))?;
        if mask.dims() != image.dims() {
            return Err(BackendError::DimensionMismatch { expected: image.dims(), actual: mask.dims() }.into());
        }
        Ok(mask)
    }

    fn probe(&self) -> bool {
        self.endpoint.probe()
    }
}
