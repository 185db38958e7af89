//! 2D vector and polyline primitives shared by every other module.
//!
//! Coordinate convention: positions are stored in the raster frame
//! (origin top-left, x right, y down). Angles are measured
//! counter-clockwise in the mathematical frame obtained by flipping y,
//! so a positive rotation of `+x` points "up" on screen. All rotation
//! and angle helpers below encode that convention once; nothing else in
//! the crate does its own trigonometry.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2D point/vector in f64, raster frame (y down).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product in the *mathematical* frame
    /// (y flipped). Positive when `o` is counter-clockwise from `self`
    /// as seen on screen.
    pub fn cross_ccw(self, o: Vec2) -> f64 {
        self.y * o.x - self.x * o.y
    }

    /// Raw raster-frame cross product, used by the segment intersection
    /// predicates where only the sign consistency matters.
    pub fn cross_raw(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Vec2) -> f64 {
        (self - o).norm_sq()
    }

    /// Unit vector, or `None` when shorter than `1e-12`.
    pub fn unit(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self * (1.0 / n))
        }
    }

    /// Rotate counter-clockwise (math frame) by `theta` radians.
    pub fn rotate_ccw(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        // In the y-down raster frame a math-CCW rotation is clockwise,
        // hence the transposed signs.
        Vec2 {
            x: c * self.x + s * self.y,
            y: -s * self.x + c * self.y,
        }
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Signed angle from `a` to `b`, counter-clockwise positive in the math
/// frame, in `(-pi, pi]`.
pub fn signed_angle(a: Vec2, b: Vec2) -> f64 {
    a.cross_ccw(b).atan2(a.dot(b))
}

/// Unsigned angle between two vectors in `[0, pi]`.
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    a.cross_ccw(b).abs().atan2(a.dot(b))
}

/// Axis-aligned rectangle, `min` is the top-left corner in raster frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn shrink(&self, margin: f64) -> Rect {
        Rect {
            min: self.min + Vec2::new(margin, margin),
            max: self.max - Vec2::new(margin, margin),
        }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    /// Two segments of distinct polylines share a collinear stretch; the
    /// crossing point is undefined there.
    #[error("degenerate overlap between polylines {a} and {b}")]
    DegenerateOverlap { a: usize, b: usize },
}

/// Intersection of segments `a0-a1` and `b0-b1`, boundary inclusive.
///
/// Returns the intersection point for transversal or endpoint-touching
/// pairs, `Ok(None)` for disjoint or parallel pairs, and
/// `Err(())` for collinear pairs overlapping on a stretch of
/// positive length.
pub fn segment_intersection(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> Result<Option<Vec2>, ()> {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let denom = d1.cross_raw(d2);
    let scale = d1.norm() * d2.norm();
    if denom.abs() <= 1e-12 * scale.max(1e-300) {
        // Parallel. Collinear iff b0 sits on the a-line.
        let off = (b0 - a0).cross_raw(d1);
        if off.abs() > 1e-9 * scale.max(1e-300) {
            return Ok(None);
        }
        // Collinear: project onto the dominant axis and compare extents.
        let axis = if d1.x.abs() >= d1.y.abs() {
            |p: Vec2| p.x
        } else {
            |p: Vec2| p.y
        };
        let (mut alo, mut ahi) = (axis(a0), axis(a1));
        if alo > ahi {
            std::mem::swap(&mut alo, &mut ahi);
        }
        let (mut blo, mut bhi) = (axis(b0), axis(b1));
        if blo > bhi {
            std::mem::swap(&mut blo, &mut bhi);
        }
        let lo = alo.max(blo);
        let hi = ahi.min(bhi);
        if hi < lo {
            return Ok(None);
        }
        if hi - lo > 1e-9 {
            return Err(());
        }
        // Touching end to end: a single shared point.
        for p in [a0, a1] {
            if p == b0 || p == b1 {
                return Ok(Some(p));
            }
        }
        return Ok(Some(a0.lerp(a1, 0.5)));
    }
    let t = (b0 - a0).cross_raw(d2) / denom;
    let u = (b0 - a0).cross_raw(d1) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Ok(Some(a0 + d1 * t))
    } else {
        Ok(None)
    }
}

/// Distance from point `p` to segment `a-b`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len_sq = d.norm_sq();
    if len_sq < 1e-24 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len_sq).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Total length of a polyline.
pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Minimum distance from a point to a polyline.
pub fn point_polyline_distance(p: Vec2, pts: &[Vec2]) -> f64 {
    if pts.len() == 1 {
        return p.dist(pts[0]);
    }
    pts.windows(2)
        .map(|w| point_segment_distance(p, w[0], w[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Nearest point on a polyline, returned as (arc position, point).
pub fn project_onto_polyline(p: Vec2, pts: &[Vec2]) -> (f64, Vec2) {
    let mut best = (0.0, pts[0], f64::INFINITY);
    let mut arc = 0.0;
    for w in pts.windows(2) {
        let d = w[1] - w[0];
        let len = d.norm();
        let t = if len < 1e-12 {
            0.0
        } else {
            ((p - w[0]).dot(d) / (len * len)).clamp(0.0, 1.0)
        };
        let q = w[0] + d * t;
        let dist = p.dist(q);
        if dist < best.2 {
            best = (arc + t * len, q, dist);
        }
        arc += len;
    }
    (best.0, best.1)
}

/// Point at arc position `s` along the polyline (clamped to its extent).
pub fn point_at_arc(pts: &[Vec2], s: f64) -> Vec2 {
    if s <= 0.0 {
        return pts[0];
    }
    let mut remaining = s;
    for w in pts.windows(2) {
        let len = w[0].dist(w[1]);
        if remaining <= len {
            if len < 1e-12 {
                return w[0];
            }
            return w[0].lerp(w[1], remaining / len);
        }
        remaining -= len;
    }
    *pts.last().unwrap()
}

/// Sample a straight segment `a -> b` every `step` units, endpoints
/// always included exactly; spacing is uniform and never exceeds `step`.
pub fn sample_segment(a: Vec2, b: Vec2, step: f64) -> Vec<Vec2> {
    let len = a.dist(b);
    let n = (len / step).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..=n {
        out.push(if i == n {
            b
        } else {
            a.lerp(b, i as f64 / n as f64)
        });
    }
    out
}
