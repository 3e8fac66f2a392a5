//! Seeded synthetic scenarios: CTRA ground-truth trajectories observed by a
//! detector with range-dependent (heteroscedastic) Gaussian noise.
//!
//! Randomness comes from a single ChaCha8 stream seeded with
//! `ScenarioConfig::seed`, so a scenario is a pure function of its config.
//!
//! Per parameter `i`, detection noise has standard deviation
//! `noise_base[i] + noise_range_coeff[i] * range`, where range is the
//! planar distance from the sensor at the origin. Parameters are ordered
//! `(x, y, z, w, l, h, θ)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::tracker::{ctra_propagate, DetectionWithCovariance, Vector6};
use crate::types::{normalize_angle, Box3D, BoxVariance};

/// Smallest dimension a noisy detection may report.
const MIN_DIM: f64 = 0.05;
/// Targets spawn at least this far from the sensor.
const MIN_SPAWN_RANGE: f64 = 5.0;
/// Preferred spacing between spawned targets.
const SPAWN_SEPARATION: f64 = 8.0;
/// Turn rate used to steer targets back into the field.
const RETURN_TURN_RATE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub n_targets: usize,
    pub n_frames: usize,
    /// Frame period, seconds.
    pub dt: f64,
    /// Targets live in `[-field_extent, field_extent]²`, meters.
    pub field_extent: f64,
    /// Noise standard deviation at range 0 per parameter.
    pub noise_base: [f64; 7],
    /// Growth of the noise standard deviation per meter of range.
    pub noise_range_coeff: [f64; 7],
    /// Expected false positives per frame (Poisson).
    pub fp_rate: f64,
    /// Miss probability per target and frame at range 0.
    pub fn_rate: f64,
    /// Additional miss probability per meter of range.
    pub fn_range_coeff: f64,
    /// Multiplier applied to the reported, not the actual, variance.
    pub miscalibration_factor: f64,
    pub speed_range: (f64, f64),
    /// Probability per frame of redrawing a target's acceleration and turn rate.
    pub perturb_prob: f64,
    pub accel_sigma: f64,
    pub turn_rate_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_targets: 15,
            n_frames: 200,
            dt: 0.1,
            field_extent: 60.0,
            noise_base: [0.05, 0.05, 0.03, 0.03, 0.05, 0.03, 0.01],
            noise_range_coeff: [0.012, 0.012, 0.002, 0.004, 0.008, 0.002, 0.001],
            fp_rate: 0.5,
            fn_rate: 0.1,
            fn_range_coeff: 0.0,
            miscalibration_factor: 1.0,
            speed_range: (2.0, 12.0),
            perturb_prob: 0.05,
            accel_sigma: 1.0,
            turn_rate_sigma: 0.15,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_targets < 1 || self.n_frames < 1 {
            return bad("n_targets and n_frames must be >= 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be > 0");
        }
        if !(self.field_extent > MIN_SPAWN_RANGE && self.field_extent.is_finite()) {
            return bad("field_extent must exceed the minimum spawn range");
        }
        for (name, r) in [
            ("fp_rate", self.fp_rate),
            ("fn_rate", self.fn_rate),
            ("perturb_prob", self.perturb_prob),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {r}")));
            }
        }
        if !(self.fn_range_coeff >= 0.0) {
            return bad("fn_range_coeff must be >= 0");
        }
        if !self
            .noise_base
            .iter()
            .chain(&self.noise_range_coeff)
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return bad("noise parameters must be finite and >= 0");
        }
        if !(self.miscalibration_factor > 0.0) {
            return bad("miscalibration_factor must be > 0");
        }
        let (lo, hi) = self.speed_range;
        if !(lo >= 0.0 && hi >= lo) {
            return bad("speed_range must satisfy 0 <= min <= max");
        }
        if !(self.accel_sigma >= 0.0 && self.turn_rate_sigma >= 0.0) {
            return bad("motion perturbation scales must be >= 0");
        }
        Ok(())
    }

    /// Per-parameter noise standard deviation at `range`.
    pub fn noise_sigma(&self, range: f64) -> [f64; 7] {
        std::array::from_fn(|i| self.noise_base[i] + self.noise_range_coeff[i] * range)
    }

    /// Largest range a target can normally reach.
    pub fn max_range(&self) -> f64 {
        self.field_extent * std::f64::consts::SQRT_2
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthObject {
    pub target_id: u64,
    pub bbox: Box3D,
    pub speed: f64,
    /// Acceleration and turn rate held over the interval to the next frame.
    pub accel: f64,
    pub turn_rate: f64,
}

impl GroundTruthObject {
    pub fn state(&self) -> Vector6 {
        Vector6::new(
            self.bbox.x,
            self.bbox.y,
            self.bbox.theta,
            self.speed,
            self.accel,
            self.turn_rate,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDetection {
    pub bbox: Box3D,
    /// Variance the noise was actually drawn with.
    pub true_variance: BoxVariance,
    /// Variance reported alongside the detection.
    pub reported_variance: BoxVariance,
    /// Generating target, `None` for false positives.
    pub source: Option<u64>,
}

/// Which variance, if any, detections hand to the tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceSource {
    Reported,
    True,
    Absent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub ground_truth: Vec<Vec<GroundTruthObject>>,
    pub detections: Vec<Vec<SimDetection>>,
}

impl Scenario {
    pub fn n_frames(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn frame_detections(&self, frame: usize, src: CovarianceSource) -> Vec<DetectionWithCovariance> {
        self.detections[frame]
            .iter()
            .map(|d| {
                let variance = match src {
                    CovarianceSource::Reported => Some(d.reported_variance),
                    CovarianceSource::True => Some(d.true_variance),
                    CovarianceSource::Absent => None,
                };
                DetectionWithCovariance::new(d.bbox, variance)
            })
            .collect()
    }

    pub fn ground_truth_object(&self, frame: usize, target_id: u64) -> Option<&GroundTruthObject> {
        self.ground_truth[frame].iter().find(|g| g.target_id == target_id)
    }
}

struct Target {
    id: u64,
    state: Vector6,
    dims: [f64; 3],
}

fn spawn_targets(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Target> {
    let e = cfg.field_extent;
    let mut targets: Vec<Target> = Vec::with_capacity(cfg.n_targets);
    for id in 0..cfg.n_targets {
        let mut pos = (0.0, 0.0);
        for _ in 0..1000 {
            pos = (rng.random_range(-e..e), rng.random_range(-e..e));
            let far_from_sensor = pos.0.hypot(pos.1) >= MIN_SPAWN_RANGE;
            let spaced = targets
                .iter()
                .all(|t| (t.state[0] - pos.0).hypot(t.state[1] - pos.1) >= SPAWN_SEPARATION);
            if far_from_sensor && spaced {
                break;
            }
        }
        let (lo, hi) = cfg.speed_range;
        let speed = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let heading = rng.random_range(-PI..PI);
        let dims = [
            rng.random_range(1.5..2.0),
            rng.random_range(3.6..4.8),
            rng.random_range(1.4..1.8),
        ];
        targets.push(Target {
            id: id as u64,
            state: Vector6::new(pos.0, pos.1, heading, speed, 0.0, 0.0),
            dims,
        });
    }
    targets
}

/// Redraws acceleration and turn rate, keeps speed in range and steers
/// targets that leave the field back towards the center.
fn perturb(t: &mut Target, cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) {
    if cfg.perturb_prob > 0.0 && rng.random_bool(cfg.perturb_prob) {
        t.state[4] = cfg.accel_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
        t.state[5] = cfg.turn_rate_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal);
    }
    let (lo, hi) = cfg.speed_range;
    let v = t.state[3];
    if (v <= lo && t.state[4] < 0.0) || (v >= hi && t.state[4] > 0.0) {
        t.state[4] = 0.0;
    }
    let (x, y, th) = (t.state[0], t.state[1], t.state[2]);
    let outside = x.abs() > cfg.field_extent || y.abs() > cfg.field_extent;
    let (s, c) = th.sin_cos();
    if outside && x * c + y * s > 0.0 {
        // turn towards the origin: sign of heading × (-position)
        let turn = (c * -y - s * -x).signum();
        let turn = if turn == 0.0 { 1.0 } else { turn };
        t.state[5] = turn * RETURN_TURN_RATE;
    }
}

fn draw_noisy_box(
    truth: &Box3D,
    sigma: &[f64; 7],
    normal: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Box3D {
    let mut p = truth.params();
    for (v, s) in p.iter_mut().zip(sigma) {
        *v += s * normal.sample(rng);
    }
    Box3D {
        x: p[0],
        y: p[1],
        z: p[2],
        w: p[3].max(MIN_DIM),
        l: p[4].max(MIN_DIM),
        h: p[5].max(MIN_DIM),
        theta: normalize_angle(p[6]),
        class: truth.class,
        score: truth.score,
    }
}

fn detection_score(range: f64, cfg: &ScenarioConfig, normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> f64 {
    (0.95 - 0.5 * range / cfg.max_range() + 0.03 * normal.sample(rng)).clamp(0.05, 1.0)
}

fn variance_of(sigma: &[f64; 7]) -> BoxVariance {
    // zero-noise configurations still report a strictly positive variance
    BoxVariance::from_array(sigma.map(|s| (s * s).max(1e-12)))
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let poisson = (cfg.fp_rate > 0.0).then(|| Poisson::new(cfg.fp_rate).expect("positive rate"));
    let mut targets = spawn_targets(cfg, &mut rng);
    let e = cfg.field_extent;

    let mut ground_truth = Vec::with_capacity(cfg.n_frames);
    let mut detections = Vec::with_capacity(cfg.n_frames);
    for _ in 0..cfg.n_frames {
        let mut gt_frame = Vec::with_capacity(targets.len());
        let mut det_frame = Vec::new();
        for t in targets.iter_mut() {
            perturb(t, cfg, &mut rng);
            let [w, l, h] = t.dims;
            let bbox = Box3D::new([t.state[0], t.state[1], 0.5 * h], [w, l, h], t.state[2]);
            gt_frame.push(GroundTruthObject {
                target_id: t.id,
                bbox,
                speed: t.state[3],
                accel: t.state[4],
                turn_rate: t.state[5],
            });

            let range = bbox.range();
            let p_miss = (cfg.fn_rate + cfg.fn_range_coeff * range).min(1.0);
            if p_miss > 0.0 && rng.random_bool(p_miss) {
                continue;
            }
            let sigma = cfg.noise_sigma(range);
            let scored = bbox.with_score(detection_score(range, cfg, &normal, &mut rng));
            let true_variance = variance_of(&sigma);
            det_frame.push(SimDetection {
                bbox: draw_noisy_box(&scored, &sigma, &normal, &mut rng),
                true_variance,
                reported_variance: true_variance.scaled(cfg.miscalibration_factor),
                source: Some(t.id),
            });
        }
        let n_fp = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            let h = rng.random_range(1.4..1.8);
            let clutter = Box3D::new(
                [rng.random_range(-e..e), rng.random_range(-e..e), 0.5 * h],
                [rng.random_range(1.5..2.0), rng.random_range(3.6..4.8), h],
                rng.random_range(-PI..PI),
            )
            .with_score(rng.random_range(0.05..0.5));
            let sigma = cfg.noise_sigma(clutter.range());
            let true_variance = variance_of(&sigma);
            det_frame.push(SimDetection {
                bbox: clutter,
                true_variance,
                reported_variance: true_variance.scaled(cfg.miscalibration_factor),
                source: None,
            });
        }
        ground_truth.push(gt_frame);
        detections.push(det_frame);

        for t in targets.iter_mut() {
            t.state = ctra_propagate(&t.state, cfg.dt);
            t.state[3] = t.state[3].max(0.0);
        }
    }

    Ok(Scenario {
        config: cfg.clone(),
        ground_truth,
        detections,
    })
}
