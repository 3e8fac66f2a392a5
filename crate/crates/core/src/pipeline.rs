//! Runs the tracker over simulated scenarios and scores the result.

use rayon::prelude::*;

use crate::error::Result;
use crate::metrics::{evaluate_tracking, EvalConfig, TrackedObject, TrackingReport};
use crate::sim::{CovarianceSource, Scenario};
use crate::tracker::{Track, Tracker, TrackerConfig};

/// Observation noise used by a tracking run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    /// Per-detection variance from the scenario.
    Adaptive(CovarianceSource),
    /// Isotropic constant σ on every parameter.
    Constant(f64),
}

impl NoiseMode {
    pub fn tracker_config(&self, base: &TrackerConfig) -> TrackerConfig {
        match *self {
            NoiseMode::Adaptive(_) => TrackerConfig {
                use_detection_covariance: true,
                ..base.clone()
            },
            NoiseMode::Constant(sigma) => base.clone().constant_sigma(sigma),
        }
    }

    fn source(&self) -> CovarianceSource {
        match *self {
            NoiseMode::Adaptive(src) => src,
            NoiseMode::Constant(_) => CovarianceSource::Absent,
        }
    }
}

/// Confirmed tracks of every frame.
pub fn run_tracker(scenario: &Scenario, base: &TrackerConfig, mode: NoiseMode) -> Result<Vec<Vec<Track>>> {
    let mut tracker = Tracker::new(mode.tracker_config(base))?;
    (0..scenario.n_frames())
        .map(|f| tracker.step(&scenario.frame_detections(f, mode.source()), scenario.config.dt))
        .collect()
}

pub fn ground_truth_objects(scenario: &Scenario) -> Vec<Vec<TrackedObject>> {
    scenario
        .ground_truth
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|g| TrackedObject {
                    id: g.target_id,
                    bbox: g.bbox,
                })
                .collect()
        })
        .collect()
}

pub fn track_objects(frames: &[Vec<Track>]) -> Vec<Vec<TrackedObject>> {
    frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .map(|t| TrackedObject {
                    id: t.id,
                    bbox: t.to_box(),
                })
                .collect()
        })
        .collect()
}

/// Planar position error of confirmed tracks against the target that
/// generated their latest detection.
///
/// Tracks updated by a false positive, or coasting without a detection,
/// are skipped. Returns `(rmse, samples)`.
pub fn position_rmse(scenario: &Scenario, frames: &[Vec<Track>]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (f, tracks) in frames.iter().enumerate() {
        for t in tracks {
            let Some(source) = t
                .last_detection
                .and_then(|di| scenario.detections[f].get(di))
                .and_then(|d| d.source)
            else {
                continue;
            };
            if let Some(g) = scenario.ground_truth_object(f, source) {
                sum += (t.pose.x() - g.bbox.x).powi(2) + (t.pose.y() - g.bbox.y).powi(2);
                n += 1;
            }
        }
    }
    if n == 0 {
        (f64::NAN, 0)
    } else {
        ((sum / n as f64).sqrt(), n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingOutcome {
    pub report: TrackingReport,
    pub position_rmse: f64,
    pub rmse_samples: usize,
}

pub fn evaluate_run(scenario: &Scenario, frames: &[Vec<Track>], eval: &EvalConfig) -> TrackingOutcome {
    let report = evaluate_tracking(&[(ground_truth_objects(scenario), track_objects(frames))], eval);
    let (position_rmse, rmse_samples) = position_rmse(scenario, frames);
    TrackingOutcome {
        report,
        position_rmse,
        rmse_samples,
    }
}

pub fn run_and_evaluate(
    scenario: &Scenario,
    base: &TrackerConfig,
    mode: NoiseMode,
    eval: &EvalConfig,
) -> Result<TrackingOutcome> {
    let frames = run_tracker(scenario, base, mode)?;
    Ok(evaluate_run(scenario, &frames, eval))
}

/// Adaptive run against a grid of constant-σ baselines on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub adaptive: TrackingOutcome,
    /// `(σ, outcome)` in grid order.
    pub baselines: Vec<(f64, TrackingOutcome)>,
}

impl Comparison {
    /// Lowest RMSE over the baselines.
    pub fn best_baseline_rmse(&self) -> f64 {
        self.baselines
            .iter()
            .map(|(_, o)| o.position_rmse)
            .fold(f64::INFINITY, f64::min)
    }

    /// Highest MOTA over the baselines.
    pub fn best_baseline_mota(&self) -> f64 {
        self.baselines
            .iter()
            .map(|(_, o)| o.report.mota)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest minus smallest baseline MOTA.
    pub fn baseline_mota_spread(&self) -> f64 {
        let min = self
            .baselines
            .iter()
            .map(|(_, o)| o.report.mota)
            .fold(f64::INFINITY, f64::min);
        self.best_baseline_mota() - min
    }
}

pub fn compare_noise_modes(
    scenario: &Scenario,
    base: &TrackerConfig,
    sigmas: &[f64],
    eval: &EvalConfig,
) -> Result<Comparison> {
    let adaptive = run_and_evaluate(scenario, base, NoiseMode::Adaptive(CovarianceSource::Reported), eval)?;
    let baselines = sigmas
        .par_iter()
        .map(|&s| Ok((s, run_and_evaluate(scenario, base, NoiseMode::Constant(s), eval)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison { adaptive, baselines })
}

/// [`compare_noise_modes`] over many scenarios in parallel; results keep input order.
pub fn compare_many(
    scenarios: &[Scenario],
    base: &TrackerConfig,
    sigmas: &[f64],
    eval: &EvalConfig,
) -> Result<Vec<Comparison>> {
    scenarios
        .par_iter()
        .map(|sc| compare_noise_modes(sc, base, sigmas, eval))
        .collect()
}
