//! Detection AP / F1 and CLEAR-MOT style tracking metrics.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::IouKind;
use crate::tracker::{hungarian_assign, FORBIDDEN_COST};
use crate::types::Box3D;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub iou_kind: IouKind,
    /// Number of equally spaced recall levels used for interpolated AP.
    pub recall_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.7,
            iou_kind: IouKind::Bev,
            recall_points: 40,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold < 1.0) {
            return Err(Error::Config(format!(
                "eval iou_threshold must be in (0, 1), got {}",
                self.iou_threshold
            )));
        }
        if self.recall_points == 0 {
            return Err(Error::Config("recall_points must be >= 1".into()));
        }
        Ok(())
    }
}

/// One-to-one matching of ground truth to predictions in a single frame.
///
/// A pair is admissible when classes agree and IoU reaches the threshold.
/// The number of matches is maximized first, total IoU second.
/// Returns `(gt index, pred index)` pairs sorted by gt index.
pub fn match_frame(gt: &[Box3D], pred: &[Box3D], cfg: &EvalConfig) -> Vec<(usize, usize)> {
    if gt.is_empty() || pred.is_empty() {
        return Vec::new();
    }
    let cost: Vec<Vec<f64>> = gt
        .iter()
        .map(|g| {
            pred.iter()
                .map(|p| {
                    if g.class != p.class {
                        return FORBIDDEN_COST;
                    }
                    let iou = cfg.iou_kind.iou(g, p);
                    if iou >= cfg.iou_threshold {
                        1.0 - iou
                    } else {
                        FORBIDDEN_COST
                    }
                })
                .collect()
        })
        .collect();
    hungarian_assign(&cost)
        .into_iter()
        .filter(|&(g, p)| cost[g][p] < FORBIDDEN_COST)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrResult {
    /// Interpolated average precision, percent.
    pub ap: f64,
    /// Best F1 over all thresholds, percent.
    pub max_f1: f64,
    /// One point per distinct score, in descending threshold order.
    pub curve: Vec<PrPoint>,
}

/// Interpolated AP (percent) over `n` recall levels `1/n, 2/n, ..., 1`.
pub fn interpolated_ap(curve: &[PrPoint], n: usize) -> f64 {
    let total: f64 = (1..=n)
        .map(|k| {
            let level = k as f64 / n as f64;
            curve
                .iter()
                .filter(|p| p.recall >= level - 1e-12)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum();
    100.0 * total / n as f64
}

/// Precision/recall sweep over every distinct prediction score.
///
/// `gt[f]` and `pred[f]` are the boxes of frame `f`; prediction scores
/// are the box scores. At each threshold only frames gaining predictions
/// are re-matched.
pub fn detection_pr(gt: &[Vec<Box3D>], pred: &[Vec<Box3D>], cfg: &EvalConfig) -> PrResult {
    assert_eq!(gt.len(), pred.len(), "gt and predictions must cover the same frames");
    let n_gt: usize = gt.iter().map(Vec::len).sum();

    let mut order: Vec<(f64, usize, usize)> = pred
        .iter()
        .enumerate()
        .flat_map(|(f, ps)| ps.iter().enumerate().map(move |(i, p)| (p.score, f, i)))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut active: Vec<Vec<Box3D>> = vec![Vec::new(); gt.len()];
    let mut tp_per_frame = vec![0usize; gt.len()];
    let mut tp = 0usize;
    let mut n_active = 0usize;
    let mut curve = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let threshold = order[i].0;
        let mut touched = Vec::new();
        while i < order.len() && order[i].0 == threshold {
            let (_, f, j) = order[i];
            active[f].push(pred[f][j]);
            n_active += 1;
            touched.push(f);
            i += 1;
        }
        touched.sort_unstable();
        touched.dedup();
        for f in touched {
            let matched = match_frame(&gt[f], &active[f], cfg).len();
            tp = tp + matched - tp_per_frame[f];
            tp_per_frame[f] = matched;
        }
        let precision = tp as f64 / n_active as f64;
        let recall = if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 };
        curve.push(PrPoint {
            threshold,
            precision,
            recall,
        });
    }

    let max_f1 = curve
        .iter()
        .filter(|p| p.precision + p.recall > 0.0)
        .map(|p| 2.0 * p.precision * p.recall / (p.precision + p.recall))
        .fold(0.0, f64::max);
    PrResult {
        ap: interpolated_ap(&curve, cfg.recall_points),
        max_f1: 100.0 * max_f1,
        curve,
    }
}

/// A box carrying a track (or ground-truth object) identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedObject {
    pub id: u64,
    pub bbox: Box3D,
}

/// Additive tracking counts; sequences combine with [`ClearMotCounts::merge`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClearMotCounts {
    pub gt_objects: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub misses: usize,
    pub id_switches: usize,
    pub fragmentations: usize,
    pub gt_tracks: usize,
    pub mostly_lost: usize,
}

impl ClearMotCounts {
    pub fn merge(&mut self, other: &ClearMotCounts) {
        self.gt_objects += other.gt_objects;
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.misses += other.misses;
        self.id_switches += other.id_switches;
        self.fragmentations += other.fragmentations;
        self.gt_tracks += other.gt_tracks;
        self.mostly_lost += other.mostly_lost;
    }

    /// `100 (1 - (FN + FP + IDSW) / GT)`; not clamped, so it can be negative.
    pub fn mota(&self) -> f64 {
        if self.gt_objects == 0 {
            return 0.0;
        }
        let errors = self.misses + self.false_positives + self.id_switches;
        100.0 * (1.0 - errors as f64 / self.gt_objects as f64)
    }

    /// Percentage of ground-truth trajectories matched in under 20% of their frames.
    pub fn mostly_lost_pct(&self) -> f64 {
        if self.gt_tracks == 0 {
            return 0.0;
        }
        100.0 * self.mostly_lost as f64 / self.gt_tracks as f64
    }
}

#[derive(Debug, Default)]
struct GtHistory {
    present: usize,
    matched: usize,
    last_pred: Option<u64>,
    tracked_before: bool,
    interrupted: bool,
}

/// CLEAR-MOT counts for one sequence.
///
/// Correspondences from the previous frame are kept while still
/// admissible; the remaining objects are matched by maximum IoU. An
/// identity switch is a ground-truth object matched to a different track
/// than at its last match; a fragmentation is a trajectory that resumes
/// after being unmatched while present.
pub fn clear_mot_counts(
    gt: &[Vec<TrackedObject>],
    pred: &[Vec<TrackedObject>],
    cfg: &EvalConfig,
) -> ClearMotCounts {
    assert_eq!(gt.len(), pred.len(), "gt and predictions must cover the same frames");
    let mut counts = ClearMotCounts::default();
    let mut history: BTreeMap<u64, GtHistory> = BTreeMap::new();
    let mut previous: HashMap<u64, u64> = HashMap::new();

    for (g_frame, p_frame) in gt.iter().zip(pred) {
        let admissible = |g: &TrackedObject, p: &TrackedObject| {
            g.bbox.class == p.bbox.class && cfg.iou_kind.iou(&g.bbox, &p.bbox) >= cfg.iou_threshold
        };
        let mut g_used = vec![false; g_frame.len()];
        let mut p_used = vec![false; p_frame.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();

        for (gi, g) in g_frame.iter().enumerate() {
            let Some(&pid) = previous.get(&g.id) else { continue };
            if let Some(pi) = p_frame.iter().position(|p| p.id == pid) {
                if !p_used[pi] && admissible(g, &p_frame[pi]) {
                    g_used[gi] = true;
                    p_used[pi] = true;
                    matches.push((gi, pi));
                }
            }
        }

        let g_rest: Vec<usize> = (0..g_frame.len()).filter(|&i| !g_used[i]).collect();
        let p_rest: Vec<usize> = (0..p_frame.len()).filter(|&i| !p_used[i]).collect();
        let g_boxes: Vec<Box3D> = g_rest.iter().map(|&i| g_frame[i].bbox).collect();
        let p_boxes: Vec<Box3D> = p_rest.iter().map(|&i| p_frame[i].bbox).collect();
        for (a, b) in match_frame(&g_boxes, &p_boxes, cfg) {
            g_used[g_rest[a]] = true;
            p_used[p_rest[b]] = true;
            matches.push((g_rest[a], p_rest[b]));
        }

        for g in g_frame {
            history.entry(g.id).or_default().present += 1;
        }
        previous.clear();
        for &(gi, pi) in &matches {
            let (gid, pid) = (g_frame[gi].id, p_frame[pi].id);
            let h = history.get_mut(&gid).expect("recorded above");
            if h.last_pred.is_some_and(|last| last != pid) {
                counts.id_switches += 1;
            }
            if h.interrupted {
                counts.fragmentations += 1;
                h.interrupted = false;
            }
            h.last_pred = Some(pid);
            h.tracked_before = true;
            h.matched += 1;
            previous.insert(gid, pid);
        }
        for (gi, g) in g_frame.iter().enumerate() {
            if !g_used[gi] {
                let h = history.get_mut(&g.id).expect("recorded above");
                if h.tracked_before {
                    h.interrupted = true;
                }
            }
        }

        counts.gt_objects += g_frame.len();
        counts.true_positives += matches.len();
        counts.misses += g_frame.len() - matches.len();
        counts.false_positives += p_frame.len() - matches.len();
    }

    counts.gt_tracks = history.len();
    counts.mostly_lost = history
        .values()
        .filter(|h| (h.matched as f64) < 0.2 * h.present as f64)
        .count();
    counts
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingReport {
    pub ap: f64,
    pub max_f1: f64,
    pub idsw: usize,
    pub frag: usize,
    /// Mostly-lost trajectories, percent.
    pub ml: f64,
    pub mota: f64,
    pub counts: ClearMotCounts,
}

impl TrackingReport {
    pub fn from_parts(pr: &PrResult, counts: ClearMotCounts) -> Self {
        Self {
            ap: pr.ap,
            max_f1: pr.max_f1,
            idsw: counts.id_switches,
            frag: counts.fragmentations,
            ml: counts.mostly_lost_pct(),
            mota: counts.mota(),
            counts,
        }
    }
}

/// Ground-truth and predicted frames of one sequence.
pub type Sequence = (Vec<Vec<TrackedObject>>, Vec<Vec<TrackedObject>>);

/// Full tracking evaluation of several sequences.
///
/// Counts are summed over sequences; AP and F1 treat all frames of all
/// sequences as one pool, with track scores as confidences.
pub fn evaluate_tracking(
    sequences: &[Sequence],
    cfg: &EvalConfig,
) -> TrackingReport {
    let mut counts = ClearMotCounts::default();
    let mut gt_boxes = Vec::new();
    let mut pred_boxes = Vec::new();
    for (gt, pred) in sequences {
        counts.merge(&clear_mot_counts(gt, pred, cfg));
        gt_boxes.extend(gt.iter().map(|f| f.iter().map(|o| o.bbox).collect::<Vec<_>>()));
        pred_boxes.extend(pred.iter().map(|f| f.iter().map(|o| o.bbox).collect::<Vec<_>>()));
    }
    let pr = detection_pr(&gt_boxes, &pred_boxes, cfg);
    TrackingReport::from_parts(&pr, counts)
}

pub fn clear_mot(
    gt: &[Vec<TrackedObject>],
    pred: &[Vec<TrackedObject>],
    cfg: &EvalConfig,
) -> TrackingReport {
    evaluate_tracking(&[(gt.to_vec(), pred.to_vec())], cfg)
}
