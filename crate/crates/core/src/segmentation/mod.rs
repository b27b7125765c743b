//! Turning user gestures into binary masks.
//!
//! The reference engine is a deterministic region grower: from a seed pixel
//! it floods every connected pixel whose RGB distance to the *seed's* color
//! is within `color_threshold`. Boxes seed the flood at their center and
//! clip to the box; brush strokes are rasterized as disc-stamped polylines.
//! An HTTP adapter ([`HttpSegmenter`]) lets an external zero-shot
//! segmentation service stand in for the region grower.

mod morphology;
mod remote;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::model::{BinaryMask, MaskSeed, PixelBox, RasterImage, Rgb, SeedError, Stroke};
use crate::remote::BackendError;

pub use morphology::{dilate, erode, feather, squared_distance_to, FeatherBand};
pub use remote::HttpSegmenter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    pub fn offsets(self) -> &'static [(i32, i32)] {
        const FOUR: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i32, i32); 8] =
            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    /// Maximum Euclidean RGB distance from the seed color.
    pub color_threshold: f64,
    pub connectivity: Connectivity,
    /// Point seeds fail with `RegionTooLarge` above this share of the image.
    pub max_region_fraction: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self { color_threshold: 60.0, connectivity: Connectivity::Four, max_region_fraction: 0.95 }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if self.color_threshold.is_nan() || self.color_threshold <= 0.0 {
            return Err(SegmentError::InvalidConfig(format!(
                "color_threshold must be positive, got {}",
                self.color_threshold
            )));
        }
        if !(self.max_region_fraction > 0.0 && self.max_region_fraction <= 1.0) {
            return Err(SegmentError::InvalidConfig(format!(
                "max_region_fraction must lie in (0, 1], got {}",
                self.max_region_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error(transparent)]
    SeedOutOfBounds(#[from] SeedError),
    #[error("region covers {area} pixels, above the limit of {limit:.1}")]
    RegionTooLarge { area: usize, limit: f64 },
    #[error("stroke list is empty")]
    EmptyStrokes,
    #[error("invalid segmenter config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

fn squared_color_distance(a: Rgb, b: Rgb) -> u32 {
    a.iter().zip(b.iter()).map(|(&p, &q)| (p as i32 - q as i32).pow(2) as u32).sum()
}

// Breadth-first flood from `seed` without the region-size guard.
fn flood(image: &RasterImage, seed: (u32, u32), config: &SegmenterConfig) -> BinaryMask {
    let (w, h) = image.dims();
    let reference = image.get(seed.0, seed.1);
    let limit = config.color_threshold * config.color_threshold;
    let accept = |p: Rgb| squared_color_distance(p, reference) as f64 <= limit;

    let mut bits = vec![false; w as usize * h as usize];
    let idx = |x: u32, y: u32| y as usize * w as usize + x as usize;
    let mut queue = VecDeque::from([seed]);
    bits[idx(seed.0, seed.1)] = true;
    while let Some((x, y)) = queue.pop_front() {
        for &(dx, dy) in config.connectivity.offsets() {
            let (nx, ny) = (x as i64 + dx as i64, y as i64 + dy as i64);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as u32, ny as u32);
            let i = idx(nx, ny);
            if !bits[i] && accept(image.get(nx, ny)) {
                bits[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    BinaryMask::new(w, h, bits).expect("dimensions come from a valid image")
}

/// Connected region of pixels similar in color to the seed pixel.
pub fn segment_from_point(
    image: &RasterImage,
    seed: (u32, u32),
    config: &SegmenterConfig,
) -> Result<BinaryMask, SegmentError> {
    config.validate()?;
    MaskSeed::point(seed.0, seed.1).validate(image.dims())?;
    let mask = flood(image, seed, config);
    let total = image.pixels().len() as f64;
    let limit = config.max_region_fraction * total;
    let area = mask.area();
    if area as f64 > limit {
        return Err(SegmentError::RegionTooLarge { area, limit });
    }
    Ok(mask)
}

/// Flood from the box center, clipped to the box.
///
/// The box bounds the result, so the region-size guard does not apply. An
/// empty intersection falls back to the whole box.
pub fn segment_from_box(
    image: &RasterImage,
    bbox: PixelBox,
    config: &SegmenterConfig,
) -> Result<BinaryMask, SegmentError> {
    config.validate()?;
    MaskSeed::Box { bbox }.validate(image.dims())?;
    let (w, h) = image.dims();
    let region = flood(image, bbox.center(), config);
    let inside = BinaryMask::from_fn(w, h, |x, y| bbox.contains(x, y)).expect("valid dims");
    let clipped = region.intersect(&inside);
    Ok(if clipped.is_empty() { inside } else { clipped })
}

fn squared_distance_to_segment(px: f64, py: f64, a: (u32, u32), b: (u32, u32)) -> f64 {
    let (ax, ay) = (a.0 as f64, a.1 as f64);
    let (dx, dy) = (b.0 as f64 - ax, b.1 as f64 - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0) };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    (px - cx).powi(2) + (py - cy).powi(2)
}

fn stamp_stroke(bits: &mut [bool], (w, h): (u32, u32), stroke: &Stroke) {
    let r = stroke.radius as i64;
    let r2 = (stroke.radius as f64).powi(2);
    let segments: Vec<((u32, u32), (u32, u32))> = if stroke.points.len() == 1 {
        vec![(stroke.points[0], stroke.points[0])]
    } else {
        stroke.points.windows(2).map(|p| (p[0], p[1])).collect()
    };
    for (a, b) in segments {
        let x_lo = (a.0.min(b.0) as i64 - r).max(0);
        let x_hi = (a.0.max(b.0) as i64 + r).min(w as i64 - 1);
        let y_lo = (a.1.min(b.1) as i64 - r).max(0);
        let y_hi = (a.1.max(b.1) as i64 + r).min(h as i64 - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                if squared_distance_to_segment(x as f64, y as f64, a, b) <= r2 {
                    bits[y as usize * w as usize + x as usize] = true;
                }
            }
        }
    }
}

/// Union of every pixel within brush radius of a stroke polyline.
pub fn mask_from_strokes(
    (width, height): (u32, u32),
    strokes: &[Stroke],
) -> Result<BinaryMask, SegmentError> {
    if strokes.is_empty() || strokes.iter().any(|s| s.points.is_empty()) {
        return Err(SegmentError::EmptyStrokes);
    }
    MaskSeed::Strokes { strokes: strokes.to_vec() }.validate((width, height))?;
    let mut bits = vec![false; width as usize * height as usize];
    for stroke in strokes {
        stamp_stroke(&mut bits, (width, height), stroke);
    }
    Ok(BinaryMask::new(width, height, bits).expect("dimensions validated above"))
}

/// A gesture-to-mask engine.
pub trait Segmenter: Send + Sync {
    fn id(&self) -> &str;
    fn segment(&self, image: &RasterImage, seed: &MaskSeed) -> Result<BinaryMask, SegmentError>;
    fn probe(&self) -> bool {
        true
    }
}

/// The deterministic offline segmenter.
#[derive(Debug, Clone, Default)]
pub struct RegionGrowingSegmenter {
    pub config: SegmenterConfig,
}

impl RegionGrowingSegmenter {
    pub fn new(config: SegmenterConfig) -> Self {
        Self { config }
    }
}

impl Segmenter for RegionGrowingSegmenter {
    fn id(&self) -> &str {
        "region"
    }

    fn segment(&self, image: &RasterImage, seed: &MaskSeed) -> Result<BinaryMask, SegmentError> {
        match seed {
            MaskSeed::Point { point } => segment_from_point(image, *point, &self.config),
            MaskSeed::Box { bbox } => segment_from_box(image, *bbox, &self.config),
            MaskSeed::Strokes { strokes } => mask_from_strokes(image.dims(), strokes),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RED: Rgb = [220, 20, 20];
    const BLUE: Rgb = [20, 20, 220];

    fn two_color() -> RasterImage {
        RasterImage::from_fn(16, 16, |x, _| if x < 8 { RED } else { BLUE }).unwrap()
    }

    #[test]
    fn point_in_red_half_selects_exactly_the_left_half() {
        let mask = segment_from_point(&two_color(), (4, 8), &SegmenterConfig::default()).unwrap();
        let expected = BinaryMask::from_fn(16, 16, |x, _| x < 8).unwrap();
        assert_eq!(mask, expected);
    }

    #[test]
    fn uniform_image_is_one_component() {
        let img = RasterImage::filled(8, 8, [90, 90, 90]).unwrap();
        let cfg = SegmenterConfig { max_region_fraction: 1.0, ..Default::default() };
        assert_eq!(segment_from_point(&img, (3, 5), &cfg).unwrap().area(), 64);
        let err = segment_from_point(&img, (3, 5), &SegmenterConfig::default()).unwrap_err();
        assert!(matches!(err, SegmentError::RegionTooLarge { area: 64, .. }));
    }

    #[test]
    fn isolated_pixel() {
        let img = RasterImage::from_fn(9, 9, |x, y| if (x, y) == (4, 4) { [255, 255, 0] } else { [0, 0, 0] }).unwrap();
        let mask = segment_from_point(&img, (4, 4), &SegmenterConfig::default()).unwrap();
        assert_eq!(mask.iter_set().collect::<Vec<_>>(), [(4, 4)]);
    }

    #[test]
    fn threshold_is_inclusive() {
        // distance exactly 60 along one channel
        let img = RasterImage::from_fn(2, 1, |x, _| if x == 0 { [100, 0, 0] } else { [160, 0, 0] }).unwrap();
        let cfg = SegmenterConfig { max_region_fraction: 1.0, ..Default::default() };
        assert_eq!(segment_from_point(&img, (0, 0), &cfg).unwrap().area(), 2);
    }

    #[test]
    fn out_of_bounds_seed() {
        let err = segment_from_point(&two_color(), (16, 0), &SegmenterConfig::default()).unwrap_err();
        assert!(matches!(err, SegmentError::SeedOutOfBounds(_)));
        let err = segment_from_box(&two_color(), PixelBox::new(0, 0, 3, 16), &SegmenterConfig::default()).unwrap_err();
        assert!(matches!(err, SegmentError::SeedOutOfBounds(_)));
    }

    #[test]
    fn box_over_red_half_is_the_full_box() {
        let bbox = PixelBox::new(0, 0, 7, 15);
        let mask = segment_from_box(&two_color(), bbox, &SegmenterConfig::default()).unwrap();
        assert_eq!(mask, BinaryMask::from_fn(16, 16, |x, y| bbox.contains(x, y)).unwrap());
    }

    #[test]
    fn unit_box() {
        let mask = segment_from_box(&two_color(), PixelBox::new(11, 3, 11, 3), &SegmenterConfig::default()).unwrap();
        assert_eq!(mask.iter_set().collect::<Vec<_>>(), [(11, 3)]);
    }

    #[test]
    fn box_straddling_the_boundary_keeps_the_center_side() {
        // center (7, 8) is red; flood stays left of x = 8
        let bbox = PixelBox::new(4, 4, 11, 12);
        let mask = segment_from_box(&two_color(), bbox, &SegmenterConfig::default()).unwrap();
        let expected = BinaryMask::from_fn(16, 16, |x, y| bbox.contains(x, y) && x < 8).unwrap();
        assert_eq!(mask, expected);
        assert!(!mask.is_empty());
    }

    #[test]
    fn single_point_radius_one_is_a_plus() {
        let mask = mask_from_strokes((11, 11), &[Stroke::new(vec![(5, 5)], 1)]).unwrap();
        let set: Vec<_> = mask.iter_set().collect();
        assert_eq!(set, [(5, 4), (4, 5), (5, 5), (6, 5), (5, 6)]);
    }

    #[test]
    fn radius_zero_row_segment() {
        let mask = mask_from_strokes((12, 8), &[Stroke::new(vec![(2, 4), (9, 4)], 0)]).unwrap();
        assert_eq!(mask.area(), 8);
        assert!(mask.iter_set().all(|(x, y)| y == 4 && (2..=9).contains(&x)));
    }

    #[test]
    fn empty_strokes_rejected() {
        assert_eq!(mask_from_strokes((4, 4), &[]).unwrap_err(), SegmentError::EmptyStrokes);
        assert_eq!(
            mask_from_strokes((4, 4), &[Stroke::new(vec![], 2)]).unwrap_err(),
            SegmentError::EmptyStrokes
        );
    }

    #[test]
    fn config_validation() {
        let bad = SegmenterConfig { color_threshold: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(SegmentError::InvalidConfig(_))));
        let bad = SegmenterConfig { max_region_fraction: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
