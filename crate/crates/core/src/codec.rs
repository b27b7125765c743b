//! PNG and base64 encodings used by the artifact store and the wire formats.
//!
//! Images travel as 8-bit RGB PNG. Masks travel as single-channel 8-bit PNG
//! with values restricted to 0 and 255.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use image::codecs::png::PngEncoder;
use image::{ColorType, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::model::{BinaryMask, RasterError, RasterImage};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("PNG decode failed: {0}")]
    Png(#[from] image::ImageError),
    #[error("invalid base64: {0}")]
    Base64(#[from] base64::DecodeError),
    #[error("mask PNG must be single-channel 8-bit, got {0:?}")]
    NotSingleChannel(ColorType),
    #[error("mask PNG contains value {0}; only 0 and 255 are allowed")]
    NonBinaryMaskValue(u8),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

fn encode(raw: &[u8], width: u32, height: u32, color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(raw, width, height, color)
        .expect("in-memory PNG encoding of a well-formed buffer cannot fail");
    out
}

pub fn encode_png(image: &RasterImage) -> Vec<u8> {
    let raw: Vec<u8> = image.pixels().iter().flatten().copied().collect();
    encode(&raw, image.width(), image.height(), ExtendedColorType::Rgb8)
}

/// Decodes any PNG to 8-bit RGB, dropping alpha.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, CodecError> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
    let (w, h) = decoded.dimensions();
    let pixels = decoded.pixels().map(|p| p.0).collect();
    Ok(RasterImage::new(w, h, pixels)?)
}

pub fn encode_mask_png(mask: &BinaryMask) -> Vec<u8> {
    let raw: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode(&raw, mask.width(), mask.height(), ExtendedColorType::L8)
}

/// Strict mask decoding: single-channel 8-bit, values 0 or 255 only.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask, CodecError> {
    let decoded = image::load_from_memory_with_format(bytes, ImageFormat::Png)?;
    if decoded.color() != ColorType::L8 {
        return Err(CodecError::NotSingleChannel(decoded.color()));
    }
    let gray = decoded.into_luma8();
    let (w, h) = gray.dimensions();
    let bits = gray
        .into_raw()
        .into_iter()
        .map(|v| match v {
            0 => Ok(false),
            255 => Ok(true),
            other => Err(CodecError::NonBinaryMaskValue(other)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BinaryMask::new(w, h, bits)?)
}

pub fn to_base64(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn from_base64(text: &str) -> Result<Vec<u8>, CodecError> {
    Ok(STANDARD.decode(text.trim())?)
}
