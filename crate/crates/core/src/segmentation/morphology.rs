//! Disc morphology and feathering on top of an exact Euclidean distance
//! transform (two separable passes of the lower-envelope-of-parabolas
//! algorithm).
//!
//! Pixels outside the image are ignored: the image border is not a mask
//! boundary, so a full-image mask erodes to itself and feathers to alpha 1.

use crate::model::BinaryMask;

// Lower envelope of parabolas rooted at the finite entries of `f`.
// `out[q] = min_p (q - p)^2 + f[p]`, or infinity when `f` has no finite entry.
fn distance_1d(f: &[f64], out: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>) {
    sites.clear();
    bounds.clear();
    let intersect = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    for q in (0..f.len()).filter(|&q| f[q].is_finite()) {
        if sites.is_empty() {
            sites.push(q);
            bounds.push(f64::NEG_INFINITY);
            continue;
        }
        let mut s = intersect(q, *sites.last().unwrap());
        while s <= *bounds.last().unwrap() {
            sites.pop();
            bounds.pop();
            s = intersect(q, *sites.last().unwrap());
        }
        sites.push(q);
        bounds.push(s);
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - sites[k] as f64;
        *slot = d * d + f[sites[k]];
    }
}

/// Squared Euclidean distance from each pixel to the nearest pixel whose
/// mask bit equals `target` (0 for those pixels themselves). Infinity when
/// no such pixel exists.
pub fn squared_distance_to(mask: &BinaryMask, target: bool) -> Vec<f64> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut grid: Vec<f64> =
        mask.bits().iter().map(|&b| if b == target { 0.0 } else { f64::INFINITY }).collect();
    let mut sites = Vec::new();
    let mut bounds = Vec::new();

    let mut column = vec![0.0; h];
    let mut column_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = grid[y * w + x];
        }
        distance_1d(&column, &mut column_out, &mut sites, &mut bounds);
        for y in 0..h {
            grid[y * w + x] = column_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        distance_1d(row, &mut row_out, &mut sites, &mut bounds);
        row.copy_from_slice(&row_out);
    }
    grid
}

/// Morphological dilation by a Euclidean disc of `radius` pixels.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let r2 = (radius as f64).powi(2);
    let bits = squared_distance_to(mask, true).into_iter().map(|d| d <= r2).collect();
    BinaryMask::new(mask.width(), mask.height(), bits).expect("same dimensions")
}

/// Morphological erosion by a Euclidean disc of `radius` pixels.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let r2 = (radius as f64).powi(2);
    let bits = squared_distance_to(mask, false)
        .into_iter()
        .zip(mask.bits())
        .map(|(d, &inside)| inside && d > r2)
        .collect();
    BinaryMask::new(mask.width(), mask.height(), bits).expect("same dimensions")
}

/// Per-pixel blend weights ramping from 0 at the mask boundary to 1 at
/// depth `radius` inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatherBand {
    radius: u32,
    width: u32,
    height: u32,
    alpha: Vec<f64>,
}

impl FeatherBand {
    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn alpha(&self, x: u32, y: u32) -> f64 {
        self.alpha[y as usize * self.width as usize + x as usize]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }
}

/// `alpha = clamp(d / radius, 0, 1)` where `d` is the distance from a mask
/// pixel to the nearest non-mask pixel; pixels outside the mask get 0.
/// With `radius == 0` the alpha equals the mask bits.
pub fn feather(mask: &BinaryMask, radius: u32) -> FeatherBand {
    let alpha = if radius == 0 {
        mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    } else {
        let w = radius as f64;
        squared_distance_to(mask, false)
            .into_iter()
            .zip(mask.bits())
            .map(|(d2, &inside)| if inside { (d2.sqrt() / w).clamp(0.0, 1.0) } else { 0.0 })
            .collect()
    };
    FeatherBand { radius, width: mask.width(), height: mask.height(), alpha }
}
