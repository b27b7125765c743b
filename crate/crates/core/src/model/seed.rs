use serde::{Deserialize, Serialize};

use super::image::PixelBox;

/// A brush polyline. A single point is a valid (zero-length) stroke.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stroke {
    pub points: Vec<(u32, u32)>,
    pub radius: u32,
}

impl Stroke {
    pub fn new(points: Vec<(u32, u32)>, radius: u32) -> Self {
        Self { points, radius }
    }
}

/// The user gesture a mask is derived from.
///
/// Serialized as `{"kind": "point", "point": [x, y]}`,
/// `{"kind": "box", "box": [x0, y0, x1, y1]}` or
/// `{"kind": "strokes", "strokes": [{"points": [[x, y], ...], "radius": r}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MaskSeed {
    Point { point: (u32, u32) },
    Box {
        #[serde(rename = "box")]
        bbox: PixelBox,
    },
    Strokes { strokes: Vec<Stroke> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeedError {
    #[error("seed coordinate ({x},{y}) lies outside the {width}x{height} image")]
    OutOfBounds { x: u32, y: u32, width: u32, height: u32 },
    #[error("box corners are not ordered (x0 <= x1, y0 <= y1)")]
    UnorderedBox,
    #[error("stroke list is empty or contains a stroke without points")]
    EmptyStrokes,
}

impl MaskSeed {
    pub fn point(x: u32, y: u32) -> Self {
        MaskSeed::Point { point: (x, y) }
    }

    pub fn bbox(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        MaskSeed::Box { bbox: PixelBox::new(x0, y0, x1, y1) }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MaskSeed::Point { .. } => "point",
            MaskSeed::Box { .. } => "box",
            MaskSeed::Strokes { .. } => "strokes",
        }
    }

    /// Checks the gesture against an image of the given size.
    pub fn validate(&self, (width, height): (u32, u32)) -> Result<(), SeedError> {
        let inside = |x: u32, y: u32| {
            if x < width && y < height {
                Ok(())
            } else {
                Err(SeedError::OutOfBounds { x, y, width, height })
            }
        };
        match self {
            MaskSeed::Point { point: (x, y) } => inside(*x, *y),
            MaskSeed::Box { bbox } => {
                if !bbox.is_ordered() {
                    return Err(SeedError::UnorderedBox);
                }
                inside(bbox.x0, bbox.y0)?;
                inside(bbox.x1, bbox.y1)
            }
            MaskSeed::Strokes { strokes } => {
                if strokes.is_empty() || strokes.iter().any(|s| s.points.is_empty()) {
                    return Err(SeedError::EmptyStrokes);
                }
                strokes.iter().flat_map(|s| &s.points).try_for_each(|&(x, y)| inside(x, y))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let json = serde_json::to_value(MaskSeed::bbox(1, 2, 3, 4)).unwrap();
        assert_eq!(json, serde_json::json!({"kind": "box", "box": [1, 2, 3, 4]}));
        let seed: MaskSeed = serde_json::from_value(serde_json::json!({
            "kind": "strokes",
            "strokes": [{"points": [[1, 1], [4, 1]], "radius": 2}]
        }))
        .unwrap();
        assert_eq!(seed, MaskSeed::Strokes { strokes: vec![Stroke::new(vec![(1, 1), (4, 1)], 2)] });
        assert_eq!(
            serde_json::to_value(MaskSeed::point(3, 9)).unwrap(),
            serde_json::json!({"kind": "point", "point": [3, 9]})
        );
    }

    #[test]
    fn validation() {
        assert!(MaskSeed::point(7, 7).validate((8, 8)).is_ok());
        assert!(matches!(MaskSeed::point(8, 0).validate((8, 8)), Err(SeedError::OutOfBounds { .. })));
        assert_eq!(MaskSeed::bbox(4, 0, 3, 0).validate((8, 8)), Err(SeedError::UnorderedBox));
        assert_eq!(MaskSeed::Strokes { strokes: vec![] }.validate((8, 8)), Err(SeedError::EmptyStrokes));
    }
}
