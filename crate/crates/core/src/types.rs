//! Shared value types: oriented boxes, per-parameter variances, classes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Wraps an angle to `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Object category. Labels follow the KITTI naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ObjectClass {
    #[default]
    Car,
    Van,
    Truck,
    Pedestrian,
    PersonSitting,
    Cyclist,
    Tram,
    Misc,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 8] = [
        ObjectClass::Car,
        ObjectClass::Van,
        ObjectClass::Truck,
        ObjectClass::Pedestrian,
        ObjectClass::PersonSitting,
        ObjectClass::Cyclist,
        ObjectClass::Tram,
        ObjectClass::Misc,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ObjectClass::Car => "Car",
            ObjectClass::Van => "Van",
            ObjectClass::Truck => "Truck",
            ObjectClass::Pedestrian => "Pedestrian",
            ObjectClass::PersonSitting => "Person_sitting",
            ObjectClass::Cyclist => "Cyclist",
            ObjectClass::Tram => "Tram",
            ObjectClass::Misc => "Misc",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectClass::ALL
            .iter()
            .copied()
            .find(|c| c.label() == s)
            .ok_or_else(|| Error::Domain(format!("unknown object class `{s}`")))
    }
}

/// A 7-parameter oriented box: center, dimensions and yaw about +z.
///
/// `w` is measured across the heading direction and `l` along it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub l: f64,
    pub h: f64,
    pub theta: f64,
    pub class: ObjectClass,
    pub score: f64,
}

impl Box3D {
    pub fn new(center: [f64; 3], dims: [f64; 3], theta: f64) -> Self {
        Self {
            x: center[0],
            y: center[1],
            z: center[2],
            w: dims[0],
            l: dims[1],
            h: dims[2],
            theta: normalize_angle(theta),
            class: ObjectClass::Car,
            score: 1.0,
        }
    }

    pub fn with_class(mut self, class: ObjectClass) -> Self {
        self.class = class;
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    /// Parameters in encoding order `(x, y, z, w, l, h, theta)`.
    pub fn params(&self) -> [f64; 7] {
        [self.x, self.y, self.z, self.w, self.l, self.h, self.theta]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.params().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox("non-finite parameter".into()));
        }
        if self.w <= 0.0 || self.l <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "non-positive dimensions w={} l={} h={}",
                self.w, self.l, self.h
            )));
        }
        Ok(())
    }

    pub fn bev_area(&self) -> f64 {
        self.w * self.l
    }

    pub fn volume(&self) -> f64 {
        self.w * self.l * self.h
    }

    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Diagonal variance of a decoded box, in world units (m², rad²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxVariance {
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
    pub var_w: f64,
    pub var_l: f64,
    pub var_h: f64,
    pub var_theta: f64,
}

impl BoxVariance {
    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            var_x: v[0],
            var_y: v[1],
            var_z: v[2],
            var_w: v[3],
            var_l: v[4],
            var_h: v[5],
            var_theta: v[6],
        }
    }

    /// The same variance `sigma²` on every parameter.
    pub fn isotropic(sigma: f64) -> Self {
        Self::from_array([sigma * sigma; 7])
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.var_x,
            self.var_y,
            self.var_z,
            self.var_w,
            self.var_l,
            self.var_h,
            self.var_theta,
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * factor))
    }

    pub fn is_positive(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v > 0.0)
    }
}
