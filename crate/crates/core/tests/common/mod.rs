//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix2x3, Matrix3, Vector2, Vector3};

/// Power series `Σ (κ/2)^{2m} / (m!)²`, summed until terms vanish.
pub fn i0_series(kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= q / (m * m);
        sum += term;
        if term < 1e-18 * sum {
            return sum;
        }
    }
}

/// Hankel expansion of `log I₀(κ)` with coefficients `((2m-1)!!)² / (m! 8^m)`.
pub fn log_i0_asymptotic(kappa: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..30 {
        let odd = (2 * m - 1) as f64;
        let next = term * odd * odd / (m as f64 * 8.0 * kappa);
        if next >= term {
            break;
        }
        term = next;
        sum += term;
    }
    kappa - 0.5 * (2.0 * PI * kappa).ln() + sum.ln()
}

/// Trapezoid rule on `(1/π) ∫₀^π e^{κ (cos t - 1)} cos(n t) dt`, i.e. `e^{-κ} Iₙ(κ)`.
/// The integrand is smooth and periodic, so the rule converges geometrically.
pub fn scaled_bessel_integral(order: u32, kappa: f64, panels: usize) -> f64 {
    let h = PI / panels as f64;
    let f = |t: f64| (kappa * (t.cos() - 1.0)).exp() * (order as f64 * t).cos();
    let mut sum = 0.5 * (f(0.0) + f(PI));
    for i in 1..panels {
        sum += f(i as f64 * h);
    }
    sum * h / PI
}

/// Corners of a `w × l` rectangle, `l` along the heading `theta`.
pub fn rect_corners(cx: f64, cy: f64, w: f64, l: f64, theta: f64) -> [(f64, f64); 4] {
    let (s, c) = theta.sin_cos();
    let (hl, hw) = (0.5 * l, 0.5 * w);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(u, v)| (cx + u * c - v * s, cy + u * s + v * c))
}

/// `y` extent of a convex polygon on the vertical line through `x`.
fn vertical_section(poly: &[(f64, f64)], x: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (x0, x1) = (a.0.min(b.0), a.0.max(b.0));
        if x < x0 || x > x1 || x1 == x0 {
            continue;
        }
        let t = (x - a.0) / (b.0 - a.0);
        let y = a.1 + t * (b.1 - a.1);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    (hi >= lo).then_some((lo, hi))
}

/// Intersection area of two convex polygons by midpoint rasterization into
/// vertical strips of width `step`, each strip's overlap length being exact.
pub fn raster_intersection_area(a: &[(f64, f64)], b: &[(f64, f64)], step: f64) -> f64 {
    let xmin = a.iter().chain(b).map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = a.iter().chain(b).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let n = ((xmax - xmin) / step).ceil() as usize;
    let mut area = 0.0;
    for i in 0..n {
        let x = xmin + (i as f64 + 0.5) * step;
        if let (Some(sa), Some(sb)) = (vertical_section(a, x), vertical_section(b, x)) {
            area += (sa.1.min(sb.1) - sa.0.max(sb.0)).max(0.0) * step;
        }
    }
    area
}

/// Minimum total cost over all injective row-to-column maps (`rows <= cols`).
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[row][c] + go(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    let cols = cost.first().map_or(0, Vec::len);
    assert!(cost.len() <= cols);
    go(cost, 0, &mut vec![false; cols])
}

/// Reference filter over `(x, y, v)` for motion along a fixed heading.
pub struct LinearKf {
    pub m: Vector3<f64>,
    pub p: Matrix3<f64>,
    pub heading: f64,
}

impl LinearKf {
    pub fn predict(&mut self, dt: f64, q: &Matrix3<f64>) {
        let (s, c) = self.heading.sin_cos();
        let f = Matrix3::new(1.0, 0.0, c * dt, 0.0, 1.0, s * dt, 0.0, 0.0, 1.0);
        self.m = f * self.m;
        self.p = f * self.p * f.transpose() + q * dt;
    }

    pub fn update(&mut self, z: Vector2<f64>, r: Vector2<f64>) {
        let h = Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let s = h * self.p * h.transpose() + nalgebra::Matrix2::from_diagonal(&r);
        let k = self.p * h.transpose() * s.try_inverse().unwrap();
        self.m += k * (z - h * self.m);
        self.p = (Matrix3::identity() - k * h) * self.p;
    }
}
