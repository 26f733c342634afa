//! Synthetic fingertip images: a hexagonal field of bright marker pins on a
//! dark membrane, displaced radially away from an indentation.

use super::frame::TactileFrame;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Marker edges ramp from full brightness to black over one pixel; the ramp is
/// shifted so the 180/255 level sits on the nominal radius.
const EDGE_OFFSET: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerLayout {
    pub positions: Vec<Vec2>,
    pub marker_radius: f64,
    pub image_size: (usize, usize),
}

impl MarkerLayout {
    /// Hexagonal patch with `rings` rings around a centre marker
    /// (1 + 3 * rings * (rings + 1) markers).
    pub fn hexagonal(rings: usize, pitch: f64, center: Vec2, marker_radius: f64, image_size: (usize, usize)) -> Self {
        let n = rings as i64;
        let mut positions = Vec::new();
        for row in -n..=n {
            for col in -n..=n {
                // axial coordinates; keep cells within hex distance `rings`
                let s = -row - col;
                if row.abs().max(col.abs()).max(s.abs()) > n {
                    continue;
                }
                let x = center.x + pitch * (col as f64 + 0.5 * row as f64);
                let y = center.y + pitch * (3f64.sqrt() / 2.0) * row as f64;
                positions.push(Vec2::new(x, y));
            }
        }
        MarkerLayout {
            positions,
            marker_radius,
            image_size,
        }
    }

    /// Offsets every marker by a uniform random vector in
    /// `[-amplitude, amplitude]^2`, reproducibly from `seed`.
    pub fn jittered(mut self, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut self.positions {
            p.x += rng.gen_range(-amplitude..=amplitude);
            p.y += rng.gen_range(-amplitude..=amplitude);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.image_size.0 as f64 / 2.0, self.image_size.1 as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.positions.len() < 4 {
            return bad(format!("layout needs at least 4 markers, has {}", self.positions.len()));
        }
        let (w, h) = (self.image_size.0 as f64, self.image_size.1 as f64);
        let r = self.marker_radius;
        for p in &self.positions {
            if p.x < r || p.y < r || p.x > w - 1.0 - r || p.y > h - 1.0 - r {
                return bad(format!("marker at ({:.1}, {:.1}) too close to the border", p.x, p.y));
            }
        }
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                if a.distance(*b) <= 2.0 * r {
                    return bad("markers overlap".into());
                }
            }
        }
        Ok(())
    }
}

impl Default for MarkerLayout {
    /// 61 markers on a 24 px hexagonal pitch with up to 4 px of fixed
    /// jitter, 4 px radius, centred in a 240 x 240 frame. A perfect lattice
    /// makes the image similarity step unevenly as rows of markers slide onto
    /// each other's former places.
    fn default() -> Self {
        MarkerLayout::hexagonal(4, 24.0, Vec2::new(120.0, 120.0), 4.0, (240, 240)).jittered(4.0, 7)
    }
}

/// Radial displacement profile `g(s)` on `s = distance / radius`, with
/// `g(0) = 1` and `g(1) = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Falloff {
    Linear,
    #[default]
    CosineSquared,
}

impl Falloff {
    pub fn eval(self, s: f64) -> f64 {
        if !(0.0..1.0).contains(&s) {
            return 0.0;
        }
        match self {
            Falloff::CosineSquared => (0.5 * PI * s).cos().powi(2),
            Falloff::Linear => 1.0 - s,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indentation {
    pub center: Vec2,
    /// 0 is the undeformed membrane, 1 the deepest press.
    pub depth: f64,
    pub radius: f64,
    #[serde(default)]
    pub falloff: Falloff,
}

impl Indentation {
    pub fn new(center: Vec2, depth: f64, radius: f64) -> Self {
        Indentation {
            center,
            depth,
            radius,
            falloff: Falloff::default(),
        }
    }
}

/// Pushes markers inside the indentation radius outward along the ray from
/// the centre by `depth * radius * g(d / radius)`.
pub fn displace_markers(positions: &[Vec2], ind: &Indentation) -> Vec<Vec2> {
    let depth = ind.depth.clamp(0.0, 1.0);
    positions
        .iter()
        .map(|&p| {
            let v = p - ind.center;
            let d = v.norm();
            if depth == 0.0 || d >= ind.radius {
                return p;
            }
            if d == 0.0 {
                return p;
            }
            p + v * (1.0 / d) * (depth * ind.radius * ind.falloff.eval(d / ind.radius))
        })
        .collect()
}

/// Renders anti-aliased bright discs on a black background. Marker centres are
/// clamped into the image.
pub fn render_frame(markers: &[Vec2], layout: &MarkerLayout, exec: Execution) -> TactileFrame {
    let (w, h) = layout.image_size;
    let r = layout.marker_radius;
    let reach = r + EDGE_OFFSET;
    let clamped: Vec<Vec2> = markers
        .iter()
        .map(|p| Vec2::new(p.x.clamp(0.0, w as f64 - 1.0), p.y.clamp(0.0, h as f64 - 1.0)))
        .collect();
    let mut frame = TactileFrame::new(w, h);
    exec.fill_rows(&mut frame.pixels, w, |y, row| {
        let yf = y as f64;
        for m in clamped.iter().filter(|m| (m.y - yf).abs() < reach) {
            let x0 = (m.x - reach).floor().max(0.0) as usize;
            let x1 = ((m.x + reach).ceil() as usize).min(w - 1);
            for (x, px) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
                let d = Vec2::new(x as f64, yf).distance(*m);
                let level = (reach - d).clamp(0.0, 1.0);
                let v = (255.0 * level).round() as u8;
                if v > *px {
                    *px = v;
                }
            }
        }
    });
    frame
}

/// How a phalanx contact is mapped onto the sensor image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactMapping {
    /// Pad compression (mm) that corresponds to depth 1.
    pub max_penetration: f64,
    /// Image point that corresponds to `pad_origin` on the phalanx.
    pub sensor_center: Vec2,
    /// Distance from the DIP joint (mm) imaged at `sensor_center`.
    pub pad_origin: f64,
    /// Image pixels per mm along the phalanx.
    pub scale: f64,
    pub radius: f64,
    #[serde(default)]
    pub falloff: Falloff,
}

impl Default for ContactMapping {
    fn default() -> Self {
        ContactMapping {
            max_penetration: 3.0,
            sensor_center: Vec2::new(120.0, 120.0),
            pad_origin: 22.0,
            scale: 4.0,
            radius: 76.0,
            falloff: Falloff::CosineSquared,
        }
    }
}

/// Indentation for a pad compression `penetration` (mm) at distance
/// `pad_position` (mm) from the DIP joint.
pub fn indentation_from_contact(penetration: f64, pad_position: f64, mapping: &ContactMapping) -> Indentation {
    let depth = (penetration.max(0.0) / mapping.max_penetration).clamp(0.0, 1.0);
    let cx = mapping.sensor_center.x + (pad_position - mapping.pad_origin) * mapping.scale;
    Indentation {
        center: Vec2::new(cx, mapping.sensor_center.y),
        depth,
        radius: mapping.radius,
        falloff: mapping.falloff,
    }
}
