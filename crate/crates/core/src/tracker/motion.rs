//! Constant turn rate and acceleration (CTRA) kinematics.

use nalgebra::SVector;

use crate::types::normalize_angle;

pub type Vector6 = SVector<f64, 6>;

/// Turn rates below this use the straight-line limit of the arc formulas.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-6;

/// State layout used throughout the tracker.
pub mod idx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const THETA: usize = 2;
    pub const V: usize = 3;
    pub const A: usize = 4;
    pub const OMEGA: usize = 5;
}

/// Integrates `(x, y, θ, v, a, ω)` over `dt` in closed form.
///
/// Yaw is not wrapped here so sigma points keep a continuous angle; callers
/// normalize after averaging.
pub fn ctra_step(s: &Vector6, dt: f64) -> Vector6 {
    let (x, y, th, v, a, w) = (s[0], s[1], s[2], s[3], s[4], s[5]);
    let th1 = th + w * dt;
    let v1 = v + a * dt;
    let (dx, dy) = if w.abs() < STRAIGHT_LINE_OMEGA {
        let dist = v * dt + 0.5 * a * dt * dt;
        let (s0, c0) = th.sin_cos();
        (dist * c0, dist * s0)
    } else {
        // difference-of-trig terms via half-angle products to avoid cancellation
        let half = (0.5 * w * dt).sin();
        let (sm, cm) = (0.5 * (th + th1)).sin_cos();
        let dsin = 2.0 * cm * half;
        let dcos = -2.0 * sm * half;
        let (s1, c1) = th1.sin_cos();
        (
            (v * dsin + a * dt * s1) / w + a * dcos / (w * w),
            (-v * dcos - a * dt * c1) / w + a * dsin / (w * w),
        )
    };
    Vector6::new(x + dx, y + dy, th1, v1, a, w)
}

/// [`ctra_step`] with the resulting yaw wrapped to `(-π, π]`.
pub fn ctra_propagate(s: &Vector6, dt: f64) -> Vector6 {
    let mut out = ctra_step(s, dt);
    out[idx::THETA] = normalize_angle(out[idx::THETA]);
    out
}
