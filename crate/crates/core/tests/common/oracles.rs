//! Slow, obviously-correct reference implementations.

use rand::Rng;
use studio_core::model::{BinaryMask, RasterImage, Rgb};
use studio_core::segmentation::Connectivity;

/// Region growing by repeated sweeps until nothing changes.
pub fn flood_fixpoint(image: &RasterImage, seed: (u32, u32), threshold: f64, connectivity: Connectivity) -> BinaryMask {
    let (w, h) = image.dims();
    let reference = image.get(seed.0, seed.1);
    let similar = |p: Rgb| {
        let d2: f64 = (0..3).map(|c| (p[c] as f64 - reference[c] as f64).powi(2)).sum();
        d2.sqrt() <= threshold
    };
    let mut set = vec![vec![false; w as usize]; h as usize];
    set[seed.1 as usize][seed.0 as usize] = true;
    let diagonal = matches!(connectivity, Connectivity::Eight);
    loop {
        let mut changed = false;
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if set[y as usize][x as usize] || !similar(image.get(x as u32, y as u32)) {
                    continue;
                }
                let touches = (-1..=1i64).any(|dy| {
                    (-1..=1i64).any(|dx| {
                        let adjacent = (dx == 0) != (dy == 0) || (diagonal && dx != 0 && dy != 0);
                        let (nx, ny) = (x + dx, y + dy);
                        adjacent
                            && nx >= 0
                            && ny >= 0
                            && nx < w as i64
                            && ny < h as i64
                            && set[ny as usize][nx as usize]
                    })
                });
                if touches {
                    set[y as usize][x as usize] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    BinaryMask::from_fn(w, h, |x, y| set[y as usize][x as usize]).unwrap()
}

/// Squared distance from every pixel to the nearest pixel with value `target`.
pub fn squared_distance_brute(mask: &BinaryMask, target: bool) -> Vec<f64> {
    let (w, h) = mask.dims();
    let sites: Vec<(i64, i64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.get(x, y) == target)
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    (0..h)
        .flat_map(|y| (0..w).map(move |x| (x as i64, y as i64)))
        .map(|(x, y)| {
            sites
                .iter()
                .map(|&(sx, sy)| ((sx - x).pow(2) + (sy - y).pow(2)) as f64)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `100 * clamp(a.b / (|a||b|), 0, 1)` computed the long way.
pub fn cosine_score(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let c = dot / (na * nb);
    100.0 * c.clamp(0.0, 1.0)
}

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// An image split into 2 to 4 flat color regions by random axis-aligned cuts,
/// with small per-pixel jitter.
pub fn region_image(rng: &mut impl Rng) -> RasterImage {
    let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
    let regions = rng.gen_range(2..=4usize);
    // colors at least 120 apart per channel sum keep regions separable
    let palette: [Rgb; 4] = [[230, 30, 30], [30, 30, 230], [30, 200, 40], [240, 240, 240]];
    let mut offset = rng.gen_range(0..4usize);
    let colors: Vec<Rgb> = (0..regions)
        .map(|_| {
            offset = (offset + 1) % 4;
            palette[offset]
        })
        .collect();
    let cuts: Vec<(bool, u32)> = (0..regions - 1).map(|_| (rng.gen_bool(0.5), rng.gen_range(0..w.max(h)))).collect();
    let jitter: Vec<[i16; 3]> =
        (0..w * h).map(|_| [rng.gen_range(-8..=8), rng.gen_range(-8..=8), rng.gen_range(-8..=8)]).collect();
    RasterImage::from_fn(w, h, |x, y| {
        let region = cuts.iter().filter(|&&(vertical, at)| if vertical { x >= at } else { y >= at }).count();
        let base = colors[region % colors.len()];
        let j = jitter[(y * w + x) as usize];
        [0, 1, 2].map(|c| (base[c] as i16 + j[c]).clamp(0, 255) as u8)
    })
    .unwrap()
}

/// A random mask of the given size with density `p`.
pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32, p: f64) -> BinaryMask {
    let bits: Vec<bool> = (0..w * h).map(|_| rng.gen_bool(p)).collect();
    BinaryMask::new(w, h, bits).unwrap()
}
