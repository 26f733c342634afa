//! Structural similarity between sensor frames.

use super::frame::TactileFrame;
use crate::error::{Error, Result};
use crate::exec::Execution;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 8,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 255.0,
        }
    }
}

/// Summed-area table with one row and column of leading zeros.
struct Integral {
    stride: usize,
    data: Vec<u64>,
}

impl Integral {
    fn build(w: usize, h: usize, f: impl Fn(usize) -> u64) -> Self {
        let stride = w + 1;
        let mut data = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u64;
            for x in 0..w {
                row += f(y * w + x);
                data[(y + 1) * stride + x + 1] = data[y * stride + x + 1] + row;
            }
        }
        Integral { stride, data }
    }

    fn window(&self, x: usize, y: usize, n: usize) -> u64 {
        let s = self.stride;
        self.data[(y + n) * s + x + n] + self.data[y * s + x] - self.data[y * s + x + n] - self.data[(y + n) * s + x]
    }
}

/// Mean SSIM over every `window x window` patch (stride 1) with population
/// statistics.
pub fn ssim(a: &TactileFrame, b: &TactileFrame, params: &SsimParams, exec: Execution) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::SizeMismatch {
            a: (a.width, a.height),
            b: (b.width, b.height),
        });
    }
    let (w, h, n) = (a.width, a.height, params.window);
    if n == 0 || w < n || h < n {
        return Err(Error::InvalidConfig(format!(
            "{w}x{h} frame is smaller than the {n}x{n} window"
        )));
    }
    let pa = &a.pixels;
    let pb = &b.pixels;
    let sa = Integral::build(w, h, |i| pa[i] as u64);
    let sb = Integral::build(w, h, |i| pb[i] as u64);
    let saa = Integral::build(w, h, |i| (pa[i] as u64).pow(2));
    let sbb = Integral::build(w, h, |i| (pb[i] as u64).pow(2));
    let sab = Integral::build(w, h, |i| pa[i] as u64 * pb[i] as u64);

    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let count = (n * n) as f64;
    let (nx, ny) = (w - n + 1, h - n + 1);
    let rows = exec.map_range(ny, |y| {
        let mut acc = 0.0;
        for x in 0..nx {
            let mu_a = sa.window(x, y, n) as f64 / count;
            let mu_b = sb.window(x, y, n) as f64 / count;
            let var_a = saa.window(x, y, n) as f64 / count - mu_a * mu_a;
            let var_b = sbb.window(x, y, n) as f64 / count - mu_b * mu_b;
            let cov = sab.window(x, y, n) as f64 / count - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            acc += num / den;
        }
        acc
    });
    Ok(rows.iter().sum::<f64>() / (nx * ny) as f64)
}

/// `1 - SSIM(frame, reference)`.
pub fn deformation(frame: &TactileFrame, reference: &TactileFrame, exec: Execution) -> Result<f64> {
    Ok(1.0 - ssim(frame, reference, &SsimParams::default(), exec)?)
}
