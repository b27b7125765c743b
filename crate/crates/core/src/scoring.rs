//! Text-image similarity scores and the initial-versus-inpainted comparison.
//!
//! A score is `100 * max(0, cos(image, text))` over unit embeddings from a
//! pluggable [`Embedder`]. Scores are comparable only between reports that
//! share an `embedder_id`.

use serde::{Deserialize, Serialize};

use crate::backends::PaletteMap;
use crate::codec;
use crate::model::{RasterImage, Rgb, ScoreReport};
use crate::remote::{BackendError, Endpoint};

const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Unit-norm embedding vector of length at least 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Scales `vector` to unit length.
    pub fn normalize(vector: Vec<f64>) -> Result<Self, ScoreError> {
        if vector.len() < 2 {
            return Err(ScoreError::InvalidEmbedding(format!("dimension {} is below 2", vector.len())));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(ScoreError::InvalidEmbedding("non-finite component".into()));
        }
        let norm = norm(&vector);
        if norm == 0.0 {
            return Err(ScoreError::InvalidEmbedding("zero vector".into()));
        }
        Ok(Self(vector.into_iter().map(|v| v / norm).collect()))
    }

    /// Accepts an already-normalized vector, checking its norm.
    pub fn from_unit(vector: Vec<f64>) -> Result<Self, ScoreError> {
        if vector.len() < 2 {
            return Err(ScoreError::InvalidEmbedding(format!("dimension {} is below 2", vector.len())));
        }
        let n = norm(&vector);
        if n.is_nan() || (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(ScoreError::InvalidEmbedding(format!("norm {n} is not 1")));
        }
        Ok(Self(vector))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `100 * max(0, cosine)`, re-normalizing both inputs.
pub fn similarity_score(image_emb: &Embedding, text_emb: &Embedding) -> Result<f64, ScoreError> {
    let (a, b) = (image_emb.as_slice(), text_emb.as_slice());
    if a.len() != b.len() {
        return Err(ScoreError::DimensionMismatch(a.len(), b.len()));
    }
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((100.0 * (dot / denom)).clamp(0.0, 100.0))
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn embed_text(&self, text: &str) -> Result<Embedding, ScoreError>;
    fn embed_image(&self, image: &RasterImage) -> Result<Embedding, ScoreError>;
    fn probe(&self) -> bool {
        true
    }
}

/// Scores both images against one prompt.
pub fn compare(
    initial: &RasterImage,
    inpainted: &RasterImage,
    prompt: &str,
    embedder: &dyn Embedder,
) -> Result<ScoreReport, ScoreError> {
    let text = embedder.embed_text(prompt)?;
    let initial_score = similarity_score(&embedder.embed_image(initial)?, &text)?;
    let inpainted_score = similarity_score(&embedder.embed_image(inpainted)?, &text)?;
    Ok(ScoreReport::new(prompt, initial_score, inpainted_score, embedder.id()))
}

/// Deterministic embedder over the palette's keywords.
///
/// Coordinates are one per palette entry plus a trailing bias axis.
/// Text sets a keyword's coordinate to 1 when it occurs as whole words;
/// text with no keyword maps to the bias axis alone. An image sets each
/// keyword's coordinate to the fraction of pixels whose nearest palette
/// color is that keyword's color (within `match_radius`); unmatched
/// pixels feed the bias axis.
#[derive(Debug, Clone)]
pub struct StubEmbedder {
    palette: PaletteMap,
    match_radius: f64,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        Self::new(PaletteMap::default())
    }
}

impl StubEmbedder {
    pub const DEFAULT_MATCH_RADIUS: f64 = 40.0;

    pub fn new(palette: PaletteMap) -> Self {
        Self { palette, match_radius: Self::DEFAULT_MATCH_RADIUS }
    }

    pub fn palette(&self) -> &PaletteMap {
        &self.palette
    }

    pub fn dim(&self) -> usize {
        self.palette.len() + 1
    }

    /// Raw (unnormalized) text coordinates.
    pub fn text_coordinates(&self, text: &str) -> Vec<f64> {
        let mut v: Vec<f64> =
            self.palette.occurrences(text).into_iter().map(|hit| if hit { 1.0 } else { 0.0 }).collect();
        let any = v.iter().any(|&x| x > 0.0);
        v.push(if any { 0.0 } else { 1.0 });
        v
    }

    /// Raw (unnormalized) image coordinates: match fractions.
    pub fn image_coordinates(&self, image: &RasterImage) -> Vec<f64> {
        let colors = self.palette.distinct_colors();
        let mut counts = vec![0usize; colors.len()];
        let mut unmatched = 0usize;
        let r2 = self.match_radius * self.match_radius;
        for px in image.pixels() {
            let nearest = colors
                .iter()
                .enumerate()
                .map(|(i, c)| (i, squared_distance(*px, *c)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match nearest {
                Some((i, d2)) if d2 <= r2 => counts[i] += 1,
                _ => unmatched += 1,
            }
        }
        let n = image.pixels().len() as f64;
        let mut v: Vec<f64> = self
            .palette
            .entries()
            .iter()
            .map(|(_, c)| {
                let i = colors.iter().position(|k| k == c).expect("color listed");
                counts[i] as f64 / n
            })
            .collect();
        v.push(unmatched as f64 / n);
        v
    }
}

fn squared_distance(a: Rgb, b: Rgb) -> f64 {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

impl Embedder for StubEmbedder {
    fn id(&self) -> &str {
        "stub"
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, ScoreError> {
        Embedding::normalize(self.text_coordinates(text))
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Embedding, ScoreError> {
        Embedding::normalize(self.image_coordinates(image))
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum EmbedBody<'a> {
    Text { text: &'a str },
    Image { image: String },
}

#[derive(Deserialize)]
struct EmbedReply {
    embedding: Vec<f64>,
}

/// `POST {text}` or `{image: base64 PNG}` → `{embedding: [..]}`.
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    endpoint: Endpoint,
    id: String,
}

impl HttpEmbedder {
    pub fn new(endpoint: Endpoint) -> Self {
        let id = format!("http:{}", endpoint.url());
        Self { endpoint, id }
    }

    fn call(&self, body: &EmbedBody<'_>) -> Result<Embedding, ScoreError> {
        let reply: EmbedReply = self.endpoint.post_json(body)?;
        Embedding::normalize(reply.embedding)
            .map_err(|e| ScoreError::Backend(BackendError::Malformed(e.to_string())))
    }
}

impl Embedder for HttpEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed_text(&self, text: &str) -> Result<Embedding, ScoreError> {
        self.call(&EmbedBody::Text { text })
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Embedding, ScoreError> {
        self.call(&EmbedBody::Image { image: codec::to_base64(&codec::encode_png(image)) })
    }

    fn probe(&self) -> bool {
        self.endpoint.probe()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> Embedding {
        Embedding::normalize(v).unwrap()
    }

    #[test]
    fn identical_orthogonal_antiparallel() {
        let a = unit(vec![0.6, 0.8]);
        assert!((similarity_score(&a, &a).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(similarity_score(&unit(vec![1.0, 0.0]), &unit(vec![0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(similarity_score(&unit(vec![1.0, 2.0]), &unit(vec![-1.0, -2.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let err = similarity_score(&unit(vec![1.0, 0.0]), &unit(vec![1.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err, ScoreError::DimensionMismatch(2, 3));
    }

    #[test]
    fn embedding_validation() {
        assert!(Embedding::normalize(vec![1.0]).is_err());
        assert!(Embedding::normalize(vec![0.0, 0.0]).is_err());
        assert!(Embedding::normalize(vec![f64::NAN, 1.0]).is_err());
        assert!(Embedding::from_unit(vec![1.0, 1.0]).is_err());
        assert!(Embedding::from_unit(vec![0.6, 0.8]).is_ok());
    }

    #[test]
    fn stub_text_is_deterministic_and_bias_only_without_keywords() {
        let e = StubEmbedder::default();
        assert_eq!(e.embed_text("blue bananas").unwrap(), e.embed_text("blue bananas").unwrap());
        let v = e.embed_text("nothing we know").unwrap();
        let last = v.dim() - 1;
        assert_eq!(v.as_slice()[last], 1.0);
        assert!(v.as_slice()[..last].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn blue_image_against_blue_text() {
        // "blue" and "river" share a color, so the image vector is
        // (e_river + e_blue)/sqrt(2) and the text vector is e_blue.
        let e = StubEmbedder::default();
        let img = RasterImage::filled(10, 10, [40, 80, 220]).unwrap();
        let score = similarity_score(&e.embed_image(&img).unwrap(), &e.embed_text("blue bananas").unwrap()).unwrap();
        assert!((score - 100.0 / 2f64.sqrt()).abs() < 1e-9, "{score}");
    }

    #[test]
    fn compare_same_image_has_zero_delta() {
        let e = StubEmbedder::default();
        let img = RasterImage::filled(10, 10, [200, 40, 40]).unwrap();
        let report = compare(&img, &img, "red apples", &e).unwrap();
        assert_eq!(report.delta, 0.0);
        assert_eq!(report.embedder_id, "stub");
    }
}
