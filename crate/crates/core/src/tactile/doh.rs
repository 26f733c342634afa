//! Determinant-of-Hessian blob detection on thresholded marker images.

use super::preprocess::BinaryImage;
use crate::exec::Execution;
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DohParams {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub scales: usize,
    /// Detections must exceed this fraction of the strongest response.
    pub response_floor: f64,
}

impl Default for DohParams {
    fn default() -> Self {
        DohParams {
            sigma_min: 2.0,
            sigma_max: 6.0,
            scales: 3,
            response_floor: 0.1,
        }
    }
}

impl DohParams {
    pub fn sigmas(&self) -> Vec<f64> {
        let n = self.scales.max(1);
        if n == 1 {
            return vec![self.sigma_min];
        }
        (0..n)
            .map(|k| self.sigma_min + (self.sigma_max - self.sigma_min) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    /// Centroid in frame pixels.
    pub x: f64,
    pub y: f64,
    pub response: f64,
    pub sigma: f64,
}

impl Marker {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerSet {
    pub markers: Vec<Marker>,
}

impl MarkerSet {
    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.markers.iter().map(Marker::position).collect()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with zero padding.
fn blur(img: &[f64], w: usize, h: usize, sigma: f64, exec: Execution) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    exec.fill_rows(&mut tmp, w, |y, row| {
        let src = &img[y * w..(y + 1) * w];
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as i64 + i as i64 - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += kv * src[xx as usize];
                }
            }
            *out = acc;
        }
    });
    let mut out = vec![0.0; w * h];
    exec.fill_rows(&mut out, w, |y, row| {
        for (i, kv) in k.iter().enumerate() {
            let yy = y as i64 + i as i64 - r;
            if yy < 0 || yy as usize >= h {
                continue;
            }
            let src = &tmp[yy as usize * w..(yy as usize + 1) * w];
            for (o, s) in row.iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    });
    out
}

/// Scale-normalised DoH `sigma^4 (Lxx Lyy - Lxy^2)` at one scale. Pixels whose
/// Hessian trace is non-negative (dark blobs, saddles) and the one-pixel
/// border are set to zero.
pub fn doh_response(img: &[f64], w: usize, h: usize, sigma: f64, exec: Execution) -> Vec<f64> {
    let l = blur(img, w, h, sigma, exec);
    let norm = sigma.powi(4);
    let mut out = vec![0.0; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    exec.fill_rows(&mut out, w, |y, row| {
        if y == 0 || y + 1 >= h {
            return;
        }
        let at = |x: usize, y: usize| l[y * w + x];
        for x in 1..w - 1 {
            let c = at(x, y);
            let lxx = at(x + 1, y) - 2.0 * c + at(x - 1, y);
            let lyy = at(x, y + 1) - 2.0 * c + at(x, y - 1);
            let lxy = 0.25 * (at(x + 1, y + 1) - at(x + 1, y - 1) - at(x - 1, y + 1) + at(x - 1, y - 1));
            if lxx + lyy < 0.0 {
                row[x] = (norm * (lxx * lyy - lxy * lxy)).max(0.0);
            }
        }
    });
    out
}

fn parabolic_offset(l: f64, c: f64, r: f64) -> f64 {
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

/// Detects bright blobs as local maxima of the scale-normalised DoH taken
/// over `params.sigmas()`, refines them to sub-pixel accuracy and suppresses
/// weaker detections within the winning scale of a stronger one.
pub fn detect_markers_doh(binary: &BinaryImage, params: &DohParams, exec: Execution) -> MarkerSet {
    let (w, h) = (binary.width, binary.height);
    if binary.count() == 0 || w < 3 || h < 3 {
        return MarkerSet::default();
    }
    let img: Vec<f64> = binary.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let sigmas = params.sigmas();

    let mut best = vec![0.0f64; w * h];
    let mut best_sigma = vec![sigmas[0]; w * h];
    for &s in &sigmas {
        let resp = doh_response(&img, w, h, s, exec);
        for (i, v) in resp.into_iter().enumerate() {
            if v > best[i] {
                best[i] = v;
                best_sigma[i] = s;
            }
        }
    }
    let peak = best.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return MarkerSet::default();
    }
    let floor = params.response_floor * peak;

    let mut candidates = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let c = best[i];
            if c <= floor {
                continue;
            }
            // strict against earlier neighbours, non-strict against later ones,
            // so a plateau yields exactly one maximum
            let mut is_max = true;
            'nb: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let j = ((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize;
                    let earlier = (dy, dx) < (0, 0);
                    if (earlier && best[j] >= c) || (!earlier && best[j] > c) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let ox = parabolic_offset(best[i - 1], c, best[i + 1]);
            let oy = parabolic_offset(best[i - w], c, best[i + w]);
            candidates.push(Marker {
                x: binary.origin.0 as f64 + x as f64 + ox,
                y: binary.origin.1 as f64 + y as f64 + oy,
                response: c,
                sigma: best_sigma[i],
            });
        }
    }

    candidates.sort_by(|a, b| b.response.total_cmp(&a.response));
    let mut kept: Vec<Marker> = Vec::with_capacity(candidates.len());
    for m in candidates {
        if kept.iter().all(|k| k.position().distance(m.position()) > k.sigma) {
            kept.push(m);
        }
    }
    kept.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    MarkerSet { markers: kept }
}
