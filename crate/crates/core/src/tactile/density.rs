//! Gaussian kernel density of marker centroids on a regular grid.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Regular grid of sample points `(x0 + i * step, y0 + j * step)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub step: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    /// Central 96 x 96 px of the default sensor at 2 px spacing, where the
    /// undeformed marker density is uniform.
    fn default() -> Self {
        GridSpec {
            x0: 72.0,
            y0: 72.0,
            step: 2.0,
            nx: 49,
            ny: 49,
        }
    }
}

impl GridSpec {
    pub fn point(&self, i: usize, j: usize) -> Vec2 {
        Vec2::new(self.x0 + i as f64 * self.step, self.y0 + j as f64 * self.step)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub h: f64,
    /// Row-major, `ny` rows of `nx` values.
    pub values: Vec<f64>,
}

impl DensityGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Grid index `(i, j)` of the smallest value; ties go to the lowest row,
    /// then the lowest column.
    pub fn argmin(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.values.iter().enumerate() {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| (k % self.spec.nx, k / self.spec.nx))
    }

    /// Nearest-neighbour resample to `nx` x `ny` cells, for compact transport.
    pub fn downsample(&self, nx: usize, ny: usize) -> DensityGrid {
        let nx = nx.clamp(1, self.spec.nx.max(1));
        let ny = ny.clamp(1, self.spec.ny.max(1));
        let sx = self.spec.nx as f64 / nx as f64;
        let sy = self.spec.ny as f64 / ny as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let src_j = ((j as f64 + 0.5) * sy) as usize;
            for i in 0..nx {
                let src_i = ((i as f64 + 0.5) * sx) as usize;
                values.push(self.get(src_i.min(self.spec.nx - 1), src_j.min(self.spec.ny - 1)));
            }
        }
        DensityGrid {
            spec: GridSpec {
                x0: self.spec.x0 + 0.5 * (sx - 1.0) * self.spec.step,
                y0: self.spec.y0 + 0.5 * (sy - 1.0) * self.spec.step,
                step: self.spec.step * sx,
                nx,
                ny,
            },
            h: self.h,
            values,
        }
    }
}

/// Mean nearest-neighbour distance between markers.
pub fn kernel_width(markers: &[Vec2]) -> Result<f64> {
    if markers.len() < 2 {
        return Err(Error::TooFewMarkers {
            needed: 2,
            got: markers.len(),
        });
    }
    let total: f64 = markers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            markers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.distance(*b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / markers.len() as f64)
}

/// `d(x, y) = 1/M sum_m exp(-|p - p_m|^2 / 2h^2) / (sqrt(2 pi) h^2)`.
pub fn density_map(markers: &[Vec2], h: f64, spec: &GridSpec, exec: Execution) -> Result<DensityGrid> {
    if markers.is_empty() {
        return Err(Error::TooFewMarkers { needed: 1, got: 0 });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidConfig(format!("kernel width must be positive, got {h}")));
    }
    let norm = 1.0 / ((2.0 * PI).sqrt() * h * h);
    let inv_two_h2 = 1.0 / (2.0 * h * h);
    let m = markers.len() as f64;
    let mut values = vec![0.0; spec.len()];
    exec.fill_rows(&mut values, spec.nx, |j, row| {
        for (i, out) in row.iter_mut().enumerate() {
            let p = spec.point(i, j);
            let s: f64 = markers
                .iter()
                .map(|q| (-(p - *q).norm_sq() * inv_two_h2).exp())
                .sum();
            *out = norm * s / m;
        }
    });
    Ok(DensityGrid { spec: *spec, h, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_marker_peak() {
        let spec = GridSpec {
            x0: 0.0,
            y0: 0.0,
            step: 1.0,
            nx: 3,
            ny: 3,
        };
        let g = density_map(&[Vec2::new(1.0, 1.0)], 1.0, &spec, Execution::Sequential).unwrap();
        assert!((g.get(1, 1) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn far_field_vanishes() {
        let spec = GridSpec {
            x0: 1000.0,
            y0: 0.0,
            step: 1.0,
            nx: 1,
            ny: 1,
        };
        let g = density_map(&[Vec2::ZERO], 5.0, &spec, Execution::Sequential).unwrap();
        assert!(g.values[0] < 1e-12);
    }

    #[test]
    fn kernel_width_examples() {
        assert_eq!(kernel_width(&[Vec2::ZERO, Vec2::new(10.0, 0.0)]).unwrap(), 10.0);
        let sq = [
            Vec2::ZERO,
            Vec2::new(10.0, 0.0),
            Vec2::new(0.0, 10.0),
            Vec2::new(10.0, 10.0),
        ];
        assert_eq!(kernel_width(&sq).unwrap(), 10.0);
        assert!(kernel_width(&[Vec2::ZERO]).is_err());
    }

    #[test]
    fn errors() {
        let spec = GridSpec::default();
        assert!(density_map(&[], 1.0, &spec, Execution::Sequential).is_err());
        assert!(density_map(&[Vec2::ZERO], 0.0, &spec, Execution::Sequential).is_err());
    }

    #[test]
    fn argmin_prefers_first_row() {
        let g = DensityGrid {
            spec: GridSpec {
                x0: 0.0,
                y0: 0.0,
                step: 1.0,
                nx: 2,
                ny: 2,
            },
            h: 1.0,
            values: vec![1.0, 0.5, 0.5, 0.7],
        };
        assert_eq!(g.argmin(), Some((1, 0)));
    }
}
