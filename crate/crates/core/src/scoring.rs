//! Uncertainty-aware detection scores and greedy NMS.
//!
//! A box's log-variances are aggregated into a scalar `g(s)`, mapped to a
//! log score `log β_s` that never increases with `g(s)`, and combined with
//! the classifier score as `β = β_d^α β_s^α`.

use crate::codec::EncodedLogVar;
use crate::error::{Error, Result};
use crate::geometry::IouKind;
use crate::types::Box3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreStrategy {
    /// Classification score only.
    #[default]
    None,
    /// `max(-k_s g + b_s, 0)`
    Linear,
    /// `-exp(k_s g + b_s)`
    Exponential,
    /// `log sigmoid(-k_s g + b_s)`
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregate {
    Max,
    #[default]
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreMapConfig {
    pub strategy: ScoreStrategy,
    pub k_s: f64,
    pub b_s: f64,
    pub aggregate: Aggregate,
    pub alpha: f64,
}

impl Default for ScoreMapConfig {
    fn default() -> Self {
        Self {
            strategy: ScoreStrategy::None,
            k_s: 0.001,
            b_s: 0.0,
            aggregate: Aggregate::Sum,
            alpha: 1.0,
        }
    }
}

impl ScoreMapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_s > 0.0 && self.k_s.is_finite()) {
            return Err(Error::Config(format!("k_s must be > 0, got {}", self.k_s)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !self.b_s.is_finite() {
            return Err(Error::Config("b_s must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsConfig {
    pub iou_threshold: f64,
    pub pre_top_k: usize,
    pub iou_kind: IouKind,
}

impl Default for NmsConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            pre_top_k: 100,
            iou_kind: IouKind::Bev,
        }
    }
}

impl NmsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iou_threshold must be in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        if self.pre_top_k == 0 {
            return Err(Error::Config("pre_top_k must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn aggregate_logvar(s: &EncodedLogVar, mode: Aggregate) -> f64 {
    let v = s.to_array();
    match mode {
        Aggregate::Max => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregate::Sum => v.iter().sum(),
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `log β_s` for an aggregated log-variance `g_s`.
pub fn map_uncertainty_to_logscore(g_s: f64, cfg: &ScoreMapConfig) -> f64 {
    match cfg.strategy {
        ScoreStrategy::None => 0.0,
        ScoreStrategy::Linear => (-cfg.k_s * g_s + cfg.b_s).max(0.0),
        ScoreStrategy::Exponential => -(cfg.k_s * g_s + cfg.b_s).exp(),
        ScoreStrategy::Sigmoid => log_sigmoid(-cfg.k_s * g_s + cfg.b_s),
    }
}

/// `β = β_d^α β_s^α`, computed in log space.
pub fn combined_score(detection_score: f64, log_beta_s: f64, alpha: f64) -> f64 {
    (alpha * (detection_score.ln() + log_beta_s)).exp()
}

/// Replaces each box's score with its uncertainty-aware score.
pub fn rescore(boxes: &[Box3D], log_vars: &[EncodedLogVar], cfg: &ScoreMapConfig) -> Vec<Box3D> {
    assert_eq!(boxes.len(), log_vars.len(), "one log-variance per box");
    boxes
        .iter()
        .zip(log_vars)
        .map(|(b, s)| {
            let g = aggregate_logvar(s, cfg.aggregate);
            let log_beta = map_uncertainty_to_logscore(g, cfg);
            b.with_score(combined_score(b.score, log_beta, cfg.alpha))
        })
        .collect()
}

/// Greedy NMS; returns indices of kept boxes in descending score order.
///
/// Ties keep input order. Only the `pre_top_k` best boxes are considered.
pub fn nms_indices(boxes: &[Box3D], cfg: &NmsConfig) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[b].score.total_cmp(&boxes[a].score));
    order.truncate(cfg.pre_top_k);
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        if keep
            .iter()
            .all(|&k| cfg.iou_kind.iou(&boxes[k], &boxes[i]) <= cfg.iou_threshold)
        {
            keep.push(i);
        }
    }
    keep
}

pub fn nms(boxes: &[Box3D], cfg: &NmsConfig) -> Vec<Box3D> {
    nms_indices(boxes, cfg).into_iter().map(|i| boxes[i]).collect()
}
