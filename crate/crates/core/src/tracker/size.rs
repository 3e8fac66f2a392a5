//! Independent scalar Kalman filters for box dimensions.

/// Filtered `(w, l, h)` with per-dimension variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeState {
    pub w: f64,
    pub l: f64,
    pub h: f64,
    pub var_w: f64,
    pub var_l: f64,
    pub var_h: f64,
}

impl SizeState {
    pub fn new(dims: [f64; 3], vars: [f64; 3]) -> Self {
        Self {
            w: dims[0],
            l: dims[1],
            h: dims[2],
            var_w: vars[0],
            var_l: vars[1],
            var_h: vars[2],
        }
    }
}

/// One scalar correction. Returns `(mean, variance)`.
pub fn scalar_kf_update(mean: f64, var: f64, meas: f64, meas_var: f64) -> (f64, f64) {
    let denom = var + meas_var;
    if denom <= 0.0 || !denom.is_finite() {
        return (mean, var);
    }
    let gain = var / denom;
    (mean + gain * (meas - mean), (1.0 - gain) * var)
}

/// Corrects each dimension with a measured size and its variances.
pub fn size_update(size: &SizeState, dims: [f64; 3], vars: [f64; 3]) -> SizeState {
    let (w, var_w) = scalar_kf_update(size.w, size.var_w, dims[0], vars[0]);
    let (l, var_l) = scalar_kf_update(size.l, size.var_l, dims[1], vars[1]);
    let (h, var_h) = scalar_kf_update(size.h, size.var_h, dims[2], vars[2]);
    SizeState {
        w,
        l,
        h,
        var_w,
        var_l,
        var_h,
    }
}
