//! Anchor-relative box encoding and log-variance decoding.
//!
//! Centers are encoded relative to the anchor diagonal (x, y) or height
//! (z), dimensions as log ratios and yaw as a plain difference. The
//! variance head predicts `s = log σ²` of those encoded values; decoding
//! maps it to world units with the first-order (delta method) expansion of
//! the inverse transform, evaluated at the decoded box.

use crate::error::{Error, Result};
use crate::types::{Box3D, BoxVariance, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub l: f64,
    pub h: f64,
    pub theta: f64,
}

impl Anchor {
    pub fn new(center: [f64; 3], dims: [f64; 3], theta: f64) -> Result<Self> {
        let a = Self {
            x: center[0],
            y: center[1],
            z: center[2],
            w: dims[0],
            l: dims[1],
            h: dims[2],
            theta,
        };
        if !(a.w > 0.0 && a.l > 0.0 && a.h > 0.0) {
            return Err(Error::InvalidBox(format!(
                "anchor dimensions must be positive, got {:?}",
                dims
            )));
        }
        Ok(a)
    }

    /// Typical anchor size `(w, l, h)` per class.
    pub fn class_dims(class: ObjectClass) -> [f64; 3] {
        match class {
            ObjectClass::Car => [1.6, 3.9, 1.56],
            ObjectClass::Van => [1.9, 5.0, 2.1],
            ObjectClass::Truck => [2.5, 10.0, 3.4],
            ObjectClass::Pedestrian | ObjectClass::PersonSitting => [0.6, 0.8, 1.73],
            ObjectClass::Cyclist => [0.6, 1.76, 1.73],
            ObjectClass::Tram => [2.6, 15.0, 3.5],
            ObjectClass::Misc => [1.5, 3.0, 1.5],
        }
    }

    /// Class-sized anchor sitting at the given box's center and yaw.
    pub fn for_box(b: &Box3D) -> Self {
        let [w, l, h] = Self::class_dims(b.class);
        Self {
            x: b.x,
            y: b.y,
            z: b.z,
            w,
            l,
            h,
            theta: b.theta,
        }
    }

    /// Bird's-eye diagonal `sqrt(l² + w²)`.
    pub fn diagonal(&self) -> f64 {
        self.l.hypot(self.w)
    }

    pub fn as_box(&self) -> Box3D {
        Box3D::new([self.x, self.y, self.z], [self.w, self.l, self.h], self.theta)
    }
}

/// Anchors of one size on a regular BEV grid, at yaw 0 and pi/2.
pub fn anchor_grid(
    x_range: (f64, f64),
    y_range: (f64, f64),
    stride: f64,
    z: f64,
    dims: [f64; 3],
) -> Result<Vec<Anchor>> {
    if !(stride > 0.0) || x_range.1 < x_range.0 || y_range.1 < y_range.0 {
        return Err(Error::Config("degenerate anchor grid".into()));
    }
    let nx = ((x_range.1 - x_range.0) / stride).floor() as usize + 1;
    let ny = ((y_range.1 - y_range.0) / stride).floor() as usize + 1;
    let mut out = Vec::with_capacity(nx * ny * 2);
    for i in 0..nx {
        for j in 0..ny {
            let c = [x_range.0 + i as f64 * stride, y_range.0 + j as f64 * stride, z];
            for theta in [0.0, std::f64::consts::FRAC_PI_2] {
                out.push(Anchor::new(c, dims, theta)?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncodedTarget {
    pub x_t: f64,
    pub y_t: f64,
    pub z_t: f64,
    pub w_t: f64,
    pub l_t: f64,
    pub h_t: f64,
    pub theta_t: f64,
}

impl EncodedTarget {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.x_t, self.y_t, self.z_t, self.w_t, self.l_t, self.h_t, self.theta_t,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            x_t: a[0],
            y_t: a[1],
            z_t: a[2],
            w_t: a[3],
            l_t: a[4],
            h_t: a[5],
            theta_t: a[6],
        }
    }
}

/// Log-variances of the encoded parameters, as emitted by a variance head.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EncodedLogVar {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
    pub s_w: f64,
    pub s_l: f64,
    pub s_h: f64,
    pub s_theta: f64,
}

impl EncodedLogVar {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.s_x, self.s_y, self.s_z, self.s_w, self.s_l, self.s_h, self.s_theta,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            s_x: a[0],
            s_y: a[1],
            s_z: a[2],
            s_w: a[3],
            s_l: a[4],
            s_h: a[5],
            s_theta: a[6],
        }
    }

    pub fn uniform(s: f64) -> Self {
        Self::from_array([s; 7])
    }
}

pub fn encode_box(gt: &Box3D, anchor: &Anchor) -> Result<EncodedTarget> {
    if !(gt.w > 0.0 && gt.l > 0.0 && gt.h > 0.0) {
        return Err(Error::InvalidBox(format!(
            "ground-truth dimensions must be positive, got w={} l={} h={}",
            gt.w, gt.l, gt.h
        )));
    }
    let d = anchor.diagonal();
    Ok(EncodedTarget {
        x_t: (gt.x - anchor.x) / d,
        y_t: (gt.y - anchor.y) / d,
        z_t: (gt.z - anchor.z) / anchor.h,
        w_t: (gt.w / anchor.w).ln(),
        l_t: (gt.l / anchor.l).ln(),
        h_t: (gt.h / anchor.h).ln(),
        theta_t: gt.theta - anchor.theta,
    })
}

/// Inverse of [`encode_box`]. Class and score are left at their defaults.
pub fn decode_box(t: &EncodedTarget, anchor: &Anchor) -> Box3D {
    let d = anchor.diagonal();
    Box3D::new(
        [
            t.x_t * d + anchor.x,
            t.y_t * d + anchor.y,
            t.z_t * anchor.h + anchor.z,
        ],
        [
            t.w_t.exp() * anchor.w,
            t.l_t.exp() * anchor.l,
            t.h_t.exp() * anchor.h,
        ],
        t.theta_t + anchor.theta,
    )
}

/// World-space variance of a decoded box from encoded log-variances.
///
/// Centers scale by the squared anchor normalizer. Dimensions use
/// `V[w] ≈ E[w]² V[w_t]` with the decoded dimension standing in for the
/// expectation. Yaw passes through unchanged.
pub fn decode_variance(s: &EncodedLogVar, anchor: &Anchor, decoded: &Box3D) -> BoxVariance {
    let d2 = anchor.diagonal().powi(2);
    BoxVariance {
        var_x: d2 * s.s_x.exp(),
        var_y: d2 * s.s_y.exp(),
        var_z: anchor.h * anchor.h * s.s_z.exp(),
        var_w: decoded.w * decoded.w * s.s_w.exp(),
        var_l: decoded.l * decoded.l * s.s_l.exp(),
        var_h: decoded.h * decoded.h * s.s_h.exp(),
        var_theta: s.s_theta.exp(),
    }
}

/// Inverse of [`decode_variance`]: recovers encoded log-variances.
pub fn encode_variance(var: &BoxVariance, anchor: &Anchor, decoded: &Box3D) -> Result<EncodedLogVar> {
    if !var.is_positive() {
        return Err(Error::Domain("variances must be positive".into()));
    }
    let d2 = anchor.diagonal().powi(2);
    Ok(EncodedLogVar {
        s_x: (var.var_x / d2).ln(),
        s_y: (var.var_y / d2).ln(),
        s_z: (var.var_z / (anchor.h * anchor.h)).ln(),
        s_w: (var.var_w / (decoded.w * decoded.w)).ln(),
        s_l: (var.var_l / (decoded.l * decoded.l)).ln(),
        s_h: (var.var_h / (decoded.h * decoded.h)).ln(),
        s_theta: var.var_theta.ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car_anchor(x: f64) -> Anchor {
        Anchor::new([x, 0.0, -1.0], [1.6, 3.9, 1.56], 0.0).unwrap()
    }

    #[test]
    fn identity_encodes_to_zero() {
        let a = car_anchor(8.0);
        let t = encode_box(&a.as_box(), &a).unwrap();
        assert_eq!(t, EncodedTarget::default());
        assert_eq!(decode_box(&EncodedTarget::default(), &a), a.as_box());
    }

    #[test]
    fn encode_examples() {
        let a = car_anchor(8.0);
        assert!((a.diagonal() - 17.77_f64.sqrt()).abs() < 1e-12);
        assert!((a.diagonal() - 4.21545).abs() < 1e-5);
        let mut gt = a.as_box();
        gt.x = 10.0;
        gt.w = 3.2;
        let t = encode_box(&gt, &a).unwrap();
        assert!((t.x_t - 0.47445).abs() < 1e-5);
        assert!((t.w_t - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn decode_dimension_example() {
        let a = car_anchor(0.0);
        let t = EncodedTarget {
            w_t: 0.69315,
            ..Default::default()
        };
        assert!((decode_box(&t, &a).w - 3.2).abs() < 1e-4);
    }

    #[test]
    fn rejects_nonpositive_ground_truth() {
        let a = car_anchor(0.0);
        let mut gt = a.as_box();
        gt.h = 0.0;
        assert!(matches!(encode_box(&gt, &a), Err(Error::InvalidBox(_))));
        assert!(Anchor::new([0.0; 3], [1.0, -1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn decode_variance_examples() {
        let a = car_anchor(0.0);
        let s = EncodedLogVar {
            s_x: 0.01_f64.ln(),
            s_w: 0.04_f64.ln(),
            ..Default::default()
        };
        let mut decoded = a.as_box();
        decoded.w = 2.0;
        let v = decode_variance(&s, &a, &decoded);
        assert!((v.var_x - 0.17771).abs() < 1e-5);
        assert!((v.var_w - 0.16).abs() < 1e-12);

        let unit = Anchor::new([0.0; 3], [0.6, 0.8, 1.0], 0.0).unwrap();
        assert!((unit.diagonal() - 1.0).abs() < 1e-15);
        let b = Box3D::new([0.0; 3], [1.0, 1.0, 1.0], 0.0);
        let v = decode_variance(&EncodedLogVar::uniform(0.0), &unit, &b);
        for x in v.to_array() {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn variance_homogeneous_in_exp_s() {
        let a = car_anchor(3.0);
        let b = a.as_box();
        let s = EncodedLogVar::uniform(-2.0);
        let mut s2 = s;
        s2.s_x += std::f64::consts::LN_2;
        let v1 = decode_variance(&s, &a, &b);
        let v2 = decode_variance(&s2, &a, &b);
        assert!((v2.var_x / v1.var_x - 2.0).abs() < 1e-14);
    }

    #[test]
    fn encode_variance_inverts_decode() {
        let a = car_anchor(1.0);
        let b = Box3D::new([2.0, 1.0, -0.8], [1.8, 4.4, 1.5], 0.3);
        let s = EncodedLogVar::from_array([-3.0, -2.5, -1.0, -4.0, -3.5, -2.0, -1.5]);
        let back = encode_variance(&decode_variance(&s, &a, &b), &a, &b).unwrap();
        for (x, y) in back.to_array().iter().zip(s.to_array()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_has_two_yaws_per_cell() {
        let g = anchor_grid((0.0, 2.0), (0.0, 1.0), 1.0, -1.0, [1.6, 3.9, 1.56]).unwrap();
        assert_eq!(g.len(), 3 * 2 * 2);
        assert!(anchor_grid((0.0, 1.0), (0.0, 1.0), 0.0, 0.0, [1.0; 3]).is_err());
    }
}
