//! `studio mask` and `studio score`: single-image utilities.

use std::path::Path;

use studio_core::codec;
use studio_core::model::{BinaryMask, MaskSeed, PixelBox, RasterImage, Stroke};
use studio_core::orchestrator::{Backends, PipelineConfig};
use studio_core::scoring::{similarity_score, ScoreError};
use studio_core::segmentation::{RegionGrowingSegmenter, Segmenter, SegmenterConfig};

use crate::CliError;

fn numbers(text: &str, what: &str, count: usize) -> Result<Vec<u32>, CliError> {
    let parts: Result<Vec<u32>, _> = text.split(',').map(|p| p.trim().parse::<u32>()).collect();
    match parts {
        Ok(v) if v.len() == count => Ok(v),
        _ => Err(CliError::Usage(format!("{what} expects {count} comma-separated integers, got {text:?}"))),
    }
}

/// `x,y`
pub fn parse_point(text: &str) -> Result<MaskSeed, CliError> {
    let v = numbers(text, "--point", 2)?;
    Ok(MaskSeed::point(v[0], v[1]))
}

/// `x0,y0,x1,y1`
pub fn parse_box(text: &str) -> Result<MaskSeed, CliError> {
    let v = numbers(text, "--box", 4)?;
    Ok(MaskSeed::bbox(v[0], v[1], v[2], v[3]))
}

/// One stroke per `x,y;x,y;...` string.
pub fn parse_strokes(texts: &[String], radius: u32) -> Result<MaskSeed, CliError> {
    let strokes = texts
        .iter()
        .map(|t| {
            let points = t
                .split(';')
                .map(|p| numbers(p, "--stroke", 2).map(|v| (v[0], v[1])))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Stroke::new(points, radius))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(MaskSeed::Strokes { strokes })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskStats {
    pub area: usize,
    pub area_fraction: f64,
    pub bbox: Option<PixelBox>,
}

impl MaskStats {
    pub fn of(mask: &BinaryMask) -> Self {
        Self { area: mask.area(), area_fraction: mask.area_fraction(), bbox: mask.bounding_box() }
    }

    pub fn render(&self) -> String {
        let bbox = match self.bbox {
            Some(b) => format!("{},{},{},{}", b.x0, b.y0, b.x1, b.y1),
            None => "none".into(),
        };
        format!("area: {}\narea_fraction: {}\nbbox: {bbox}\n", self.area, self.area_fraction)
    }
}

pub fn read_image(path: &Path) -> Result<RasterImage, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    codec::decode_png(&bytes).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Segments `image` with the offline engine.
pub fn mask_preview(image: &RasterImage, seed: &MaskSeed, config: SegmenterConfig) -> Result<BinaryMask, CliError> {
    seed.validate(image.dims()).map_err(|e| CliError::Invalid(e.to_string()))?;
    RegionGrowingSegmenter::new(config).segment(image, seed).map_err(|e| CliError::Invalid(e.to_string()))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), CliError> {
    std::fs::write(path, codec::encode_mask_png(mask))
        .map_err(|e| CliError::Backend(format!("cannot write {}: {e}", path.display())))
}

/// Similarity of `image` to `prompt` on the 0..=100 scale.
pub fn score_image(image: &RasterImage, prompt: &str, embedder: &str) -> Result<f64, CliError> {
    let config = PipelineConfig { embedder: embedder.to_owned(), ..Default::default() };
    let backends = Backends::resolve(&config).map_err(|e| CliError::Invalid(e.to_string()))?;
    let score = || -> Result<f64, ScoreError> {
        let text = backends.embedder.embed_text(prompt)?;
        let picture = backends.embedder.embed_image(image)?;
        similarity_score(&picture, &text)
    };
    score().map_err(|e| match e {
        ScoreError::Backend(b) => CliError::Backend(b.to_string()),
        other => CliError::Invalid(other.to_string()),
    })
}
