//! Rotated-rectangle intersection and IoU.
//!
//! The intersection of two rectangles is convex, so it is obtained by
//! clipping one rectangle against the four edge half-planes of the other
//! (Sutherland-Hodgman) and measuring the result with the shoelace formula.

use crate::types::Box3D;

/// Points within this distance outside an edge count as inside.
const EDGE_EPS: f64 = 1e-9;

pub type Point = [f64; 2];

/// Bird's-eye footprint of a box. `l` runs along the heading `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatedRect {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub l: f64,
    pub theta: f64,
}

impl RotatedRect {
    pub fn new(cx: f64, cy: f64, w: f64, l: f64, theta: f64) -> Self {
        Self { cx, cy, w, l, theta }
    }

    pub fn area(&self) -> f64 {
        self.w * self.l
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point; 4] {
        let (s, c) = self.theta.sin_cos();
        let hl = 0.5 * self.l;
        let hw = 0.5 * self.w;
        [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| {
            [self.cx + u * c - v * s, self.cy + u * s + v * c]
        })
    }
}

impl From<&Box3D> for RotatedRect {
    fn from(b: &Box3D) -> Self {
        Self::new(b.x, b.y, b.w, b.l, b.theta)
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed distance of `p` to the left of the directed edge `a -> b`.
fn side(a: Point, b: Point, p: Point) -> f64 {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    cross(a, b, p) / len
}

fn clip_half_plane(poly: &[Point], a: Point, b: Point) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = side(a, b, p);
        let dq = side(a, b, q);
        let p_in = dp >= -EDGE_EPS;
        let q_in = dq >= -EDGE_EPS;
        if p_in {
            out.push(p);
        }
        if p_in != q_in {
            let t = dp / (dp - dq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Convex polygon `a ∩ b`, counter-clockwise. Empty when disjoint.
pub fn intersection_polygon(a: &RotatedRect, b: &RotatedRect) -> Vec<Point> {
    let mut poly: Vec<Point> = a.corners().to_vec();
    let clip = b.corners();
    for i in 0..4 {
        if poly.is_empty() {
            break;
        }
        poly = clip_half_plane(&poly, clip[i], clip[(i + 1) % 4]);
    }
    poly
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..poly.len())
        .map(|i| {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

pub fn rotated_intersection_area(a: &RotatedRect, b: &RotatedRect) -> f64 {
    polygon_area(&intersection_polygon(a, b))
        .max(0.0)
        .min(a.area().min(b.area()))
}

fn iou_from_parts(inter: f64, area_a: f64, area_b: f64) -> f64 {
    let union = area_a + area_b - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn iou_bev(a: &Box3D, b: &Box3D) -> f64 {
    let ra = RotatedRect::from(a);
    let rb = RotatedRect::from(b);
    iou_from_parts(rotated_intersection_area(&ra, &rb), ra.area(), rb.area())
}

/// Volume IoU; `z` is the box center and `h` its full height.
pub fn iou_3d(a: &Box3D, b: &Box3D) -> f64 {
    let top = (a.z + 0.5 * a.h).min(b.z + 0.5 * b.h);
    let bottom = (a.z - 0.5 * a.h).max(b.z - 0.5 * b.h);
    let overlap = (top - bottom).max(0.0);
    if overlap == 0.0 {
        return 0.0;
    }
    let inter = rotated_intersection_area(&a.into(), &b.into()) * overlap;
    iou_from_parts(inter, a.volume(), b.volume())
}

/// Which IoU to use for matching and suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IouKind {
    #[default]
    Bev,
    ThreeD,
}

impl IouKind {
    pub fn iou(self, a: &Box3D, b: &Box3D) -> f64 {
        match self {
            IouKind::Bev => iou_bev(a, b),
            IouKind::ThreeD => iou_3d(a, b),
        }
    }
}
