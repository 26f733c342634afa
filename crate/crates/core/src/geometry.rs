//! Small planar geometry toolkit: points, segments, circles, convex polygons
//! and convex hulls.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Parameter in [0, 1] of the point on the segment closest to `p`.
    pub fn closest_param(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let len_sq = d.norm_sq();
        if len_sq == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / len_sq).clamp(0.0, 1.0)
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.a + (self.b - self.a) * t
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        self.point_at(self.closest_param(p))
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    fn intersects(&self, o: &Segment) -> bool {
        let d1 = (self.b - self.a).cross(o.a - self.a);
        let d2 = (self.b - self.a).cross(o.b - self.a);
        let d3 = (o.b - o.a).cross(self.a - o.a);
        let d4 = (o.b - o.a).cross(self.b - o.a);
        d1 * d2 < 0.0 && d3 * d4 < 0.0
    }

    /// Closest pair of points between two segments (on self, on other).
    pub fn closest_points(&self, o: &Segment) -> (Vec2, Vec2) {
        if self.intersects(o) {
            // any crossing point will do; both distances are zero
            let d = self.b - self.a;
            let e = o.b - o.a;
            let t = (o.a - self.a).cross(e) / d.cross(e);
            let p = self.point_at(t);
            return (p, p);
        }
        let candidates = [
            (self.a, o.closest_point(self.a)),
            (self.b, o.closest_point(self.b)),
            (self.closest_point(o.a), o.a),
            (self.closest_point(o.b), o.b),
        ];
        candidates
            .into_iter()
            .min_by(|x, y| x.0.distance(x.1).total_cmp(&y.0.distance(y.1)))
            .unwrap()
    }
}

/// Shoelace area of a simple polygon (positive for counter-clockwise order).
pub fn polygon_signed_area(poly: &[Vec2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let j = (i + 1) % poly.len();
        acc += poly[i].cross(poly[j]);
    }
    0.5 * acc
}

/// True when the vertices form a strictly convex polygon in either winding.
pub fn is_convex(poly: &[Vec2]) -> bool {
    if poly.len() < 3 {
        return false;
    }
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let z = (b - a).cross(c - b);
        if z.abs() < 1e-12 {
            return false;
        }
        if sign == 0.0 {
            sign = z.signum();
        } else if z.signum() != sign {
            return false;
        }
    }
    true
}

/// Point-in-convex-polygon test (boundary counts as inside).
pub fn convex_contains(poly: &[Vec2], p: Vec2) -> bool {
    let n = poly.len();
    let orient = polygon_signed_area(poly).signum();
    (0..n).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        (b - a).cross(p - a) * orient >= 0.0
    })
}

/// Andrew's monotone chain. Returns the hull counter-clockwise without the
/// closing vertex; collinear points are dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 1]) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 1]) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn convex_hull_area(points: &[Vec2]) -> f64 {
    polygon_signed_area(&convex_hull(points)).abs()
}
