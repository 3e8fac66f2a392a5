//! Covariance-aware multi-object tracker.
//!
//! Each frame runs predict → associate → update → buffer maintenance:
//!
//! 1. every track's pose is predicted with the CTRA unscented filter;
//! 2. detections are assigned to tracks by the Hungarian method on planar
//!    center distance, gated by class and `gate_distance`;
//! 3. matched tracks take a pose update on `(x, y, θ)` and a scalar size
//!    update, while `z` and `h` are copied from the detection;
//! 4. unmatched tracks accumulate misses and are dropped after `t_drop`;
//!    unmatched detections open tentative tracks, confirmed after `t_init`
//!    consecutive hits.
//!
//! When `use_detection_covariance` is set, each detection's own variance is
//! used as observation noise and as the initial noise of tracks it spawns.
//! Otherwise `default_obs_noise` is used everywhere.

mod assign;
pub mod motion;
mod size;
mod ukf;

pub use assign::{associate, hungarian_assign, Association, FORBIDDEN_COST};
pub use motion::{ctra_propagate, ctra_step, Vector6, STRAIGHT_LINE_OMEGA};
pub use size::{scalar_kf_update, size_update, SizeState};
pub use ukf::{
    repair_covariance, ukf_predict, ukf_update, yaw_innovation, Matrix6, PoseState, UkfParams,
};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::{Box3D, BoxVariance, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    /// Confirmed earlier but missed in the latest frame.
    Lost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionWithCovariance {
    pub bbox: Box3D,
    pub variance: Option<BoxVariance>,
}

impl DetectionWithCovariance {
    pub fn new(bbox: Box3D, variance: Option<BoxVariance>) -> Self {
        Self { bbox, variance }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Largest admissible center distance for an association, meters.
    pub gate_distance: f64,
    /// Consecutive hits before a track is reported.
    pub t_init: u32,
    /// Consecutive misses before a track is deleted.
    pub t_drop: u32,
    /// Diagonal of the pose process noise per second, `(x, y, θ, v, a, ω)`.
    pub process_noise: [f64; 6],
    pub default_obs_noise: BoxVariance,
    pub use_detection_covariance: bool,
    /// Prior variance of `(v, a, ω)` for new tracks.
    pub initial_motion_variance: [f64; 3],
    pub ukf: UkfParams,
    /// Weight of the newest detection score in the track score average.
    pub score_smoothing: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gate_distance: 2.5,
            t_init: 3,
            t_drop: 5,
            process_noise: [1e-4, 1e-4, 1e-4, 0.05, 1.0, 0.05],
            default_obs_noise: BoxVariance::isotropic(1.0),
            use_detection_covariance: true,
            initial_motion_variance: [100.0, 9.0, 0.25],
            ukf: UkfParams::default(),
            score_smoothing: 0.5,
        }
    }
}

impl TrackerConfig {
    /// Baseline configuration with a constant `sigma` on every parameter.
    pub fn constant_sigma(mut self, sigma: f64) -> Self {
        self.default_obs_noise = BoxVariance::isotropic(sigma);
        self.use_detection_covariance = false;
        self
    }

    pub fn process_noise_matrix(&self) -> Matrix6 {
        Matrix6::from_diagonal(&Vector6::from_row_slice(&self.process_noise))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_distance > 0.0) {
            return Err(Error::Config("gate_distance must be > 0".into()));
        }
        if self.t_init < 1 || self.t_drop < 1 {
            return Err(Error::Config("t_init and t_drop must be >= 1".into()));
        }
        if !self.process_noise.iter().all(|q| q.is_finite() && *q >= 0.0) {
            return Err(Error::Config("process noise must be finite and >= 0".into()));
        }
        if !self.default_obs_noise.is_positive() {
            return Err(Error::Config("default observation noise must be > 0".into()));
        }
        if !self.initial_motion_variance.iter().all(|q| q.is_finite() && *q >= 0.0) {
            return Err(Error::Config("initial motion variance must be >= 0".into()));
        }
        if !(self.ukf.alpha > 0.0) {
            return Err(Error::Config("ukf alpha must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.score_smoothing) {
            return Err(Error::Config("score_smoothing must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub class: ObjectClass,
    pub pose: PoseState,
    pub size: SizeState,
    pub z_latest: f64,
    pub h_latest: f64,
    pub hits: u32,
    pub misses: u32,
    pub status: TrackStatus,
    /// Smoothed detection score.
    pub score: f64,
    /// Index of the detection matched in the latest frame.
    pub last_detection: Option<usize>,
}

impl Track {
    /// Current box estimate. Height and vertical position come straight
    /// from the latest detection.
    pub fn to_box(&self) -> Box3D {
        Box3D {
            x: self.pose.x(),
            y: self.pose.y(),
            z: self.z_latest,
            w: self.size.w,
            l: self.size.l,
            h: self.h_latest,
            theta: self.pose.theta(),
            class: self.class,
            score: self.score,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    q: Matrix6,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            q: cfg.process_noise_matrix(),
            cfg,
            tracks: Vec::new(),
            next_id: 1,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// All live tracks, including tentative and lost ones.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Observation noise for a detection. Missing or invalid variances
    /// fall back to the configured default.
    fn observation_noise(&self, det: &DetectionWithCovariance) -> BoxVariance {
        match det.variance {
            Some(v) if self.cfg.use_detection_covariance && v.is_positive() => v,
            _ => self.cfg.default_obs_noise,
        }
    }

    fn spawn(&mut self, det: &DetectionWithCovariance, det_index: usize) {
        let noise = self.observation_noise(det);
        let b = &det.bbox;
        let [var_v, var_a, var_w] = self.cfg.initial_motion_variance;
        let pose = PoseState::new(
            Vector6::new(b.x, b.y, b.theta, 0.0, 0.0, 0.0),
            Matrix6::from_diagonal(&Vector6::new(
                noise.var_x,
                noise.var_y,
                noise.var_theta,
                var_v,
                var_a,
                var_w,
            )),
        );
        self.tracks.push(Track {
            id: self.next_id,
            class: b.class,
            pose,
            size: SizeState::new([b.w, b.l, b.h], [noise.var_w, noise.var_l, noise.var_h]),
            z_latest: b.z,
            h_latest: b.h,
            hits: 1,
            misses: 0,
            status: TrackStatus::Tentative,
            score: b.score,
            last_detection: Some(det_index),
        });
        self.next_id += 1;
    }

    /// Advances every track by `dt` seconds and ingests one frame of
    /// detections. Returns the confirmed tracks.
    pub fn step(&mut self, dets: &[DetectionWithCovariance], dt: f64) -> Result<Vec<Track>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {dt}")));
        }
        for t in &mut self.tracks {
            t.pose = ukf_predict(&t.pose, dt, &self.q, &self.cfg.ukf);
        }

        let assoc = associate(&self.tracks, dets, &self.cfg);
        for &(ti, di) in &assoc.matches {
            let det = &dets[di];
            let noise = self.observation_noise(det);
            let b = &det.bbox;
            let track = &mut self.tracks[ti];
            track.pose = ukf_update(
                &track.pose,
                &Vector3::new(b.x, b.y, b.theta),
                &Vector3::new(noise.var_x, noise.var_y, noise.var_theta),
            )?;
            track.size = size_update(
                &track.size,
                [b.w, b.l, b.h],
                [noise.var_w, noise.var_l, noise.var_h],
            );
            track.z_latest = b.z;
            track.h_latest = b.h;
            track.hits += 1;
            track.misses = 0;
            track.score += self.cfg.score_smoothing * (b.score - track.score);
            track.last_detection = Some(di);
            if track.status == TrackStatus::Lost {
                track.status = TrackStatus::Confirmed;
            }
        }
        for &ti in &assoc.unmatched_tracks {
            let track = &mut self.tracks[ti];
            track.misses += 1;
            track.hits = 0;
            track.last_detection = None;
            if track.status == TrackStatus::Confirmed {
                track.status = TrackStatus::Lost;
            }
        }
        let t_drop = self.cfg.t_drop;
        self.tracks.retain(|t| t.misses < t_drop);

        for &di in &assoc.unmatched_detections {
            self.spawn(&dets[di], di);
        }
        let t_init = self.cfg.t_init;
        for t in &mut self.tracks {
            if t.status == TrackStatus::Tentative && t.hits >= t_init {
                t.status = TrackStatus::Confirmed;
            }
        }

        Ok(self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .cloned()
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, y: f64) -> DetectionWithCovariance {
        DetectionWithCovariance::new(
            Box3D::new([x, y, -1.0], [1.6, 3.9, 1.5], 0.0).with_score(0.9),
            None,
        )
    }

    #[test]
    fn empty_in_empty_out() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        assert!(t.step(&[], 0.1).unwrap().is_empty());
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn rejects_bad_dt_and_config() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        assert!(t.step(&[], 0.0).is_err());
        let cfg = TrackerConfig {
            t_init: 0,
            ..Default::default()
        };
        assert!(Tracker::new(cfg).is_err());
        let cfg = TrackerConfig {
            gate_distance: -1.0,
            ..Default::default()
        };
        assert!(Tracker::new(cfg).is_err());
    }

    #[test]
    fn confirmation_after_t_init_hits() {
        let cfg = TrackerConfig::default();
        let t_init = cfg.t_init;
        let mut t = Tracker::new(cfg).unwrap();
        let mut id = None;
        for frame in 1..=10 {
            let out = t.step(&[det(10.0, 5.0)], 0.1).unwrap();
            if frame < t_init {
                assert!(out.is_empty());
            } else {
                assert_eq!(out.len(), 1);
                let cur = out[0].id;
                assert_eq!(*id.get_or_insert(cur), cur);
            }
        }
    }

    #[test]
    fn dropped_track_reappears_with_new_id() {
        let cfg = TrackerConfig::default();
        let t_drop = cfg.t_drop;
        let mut t = Tracker::new(cfg).unwrap();
        for _ in 0..5 {
            t.step(&[det(0.0, 0.0)], 0.1).unwrap();
        }
        let first = t.tracks()[0].id;
        for k in 1..=t_drop {
            let out = t.step(&[], 0.1).unwrap();
            assert!(out.is_empty());
            assert_eq!(t.tracks().len(), usize::from(k < t_drop));
        }
        t.step(&[det(0.0, 0.0)], 0.1).unwrap();
        assert!(t.tracks()[0].id > first);
    }

    #[test]
    fn gating_and_class_mismatch() {
        let cfg = TrackerConfig::default();
        let mut t = Tracker::new(cfg.clone()).unwrap();
        t.step(&[det(0.0, 0.0)], 0.1).unwrap();
        let near = [det(0.1, 0.0)];
        let a = associate(t.tracks(), &near, &cfg);
        assert_eq!(a.matches, vec![(0, 0)]);
        let far = [det(5.0, 0.0)];
        let a = associate(t.tracks(), &far, &cfg);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracks, vec![0]);
        assert_eq!(a.unmatched_detections, vec![0]);
        let mut other = det(0.1, 0.0);
        other.bbox.class = ObjectClass::Pedestrian;
        let a = associate(t.tracks(), &[other], &cfg);
        assert!(a.matches.is_empty());
    }

    #[test]
    fn detection_variance_drives_spawn_covariance() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        let var = BoxVariance::from_array([0.04, 0.09, 0.01, 0.02, 0.03, 0.01, 0.0025]);
        let mut d = det(3.0, 4.0);
        d.variance = Some(var);
        t.step(&[d], 0.1).unwrap();
        let c = t.tracks()[0].pose.covariance;
        assert_eq!(c[(0, 0)], 0.04);
        assert_eq!(c[(1, 1)], 0.09);
        assert_eq!(c[(2, 2)], 0.0025);
        assert_eq!(t.tracks()[0].size.var_l, 0.03);

        let mut t = Tracker::new(TrackerConfig::default().constant_sigma(2.0)).unwrap();
        t.step(&[d], 0.1).unwrap();
        assert_eq!(t.tracks()[0].pose.covariance[(0, 0)], 4.0);
    }
}
