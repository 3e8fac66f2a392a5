//! TOML run configuration.
//!
//! Every section is optional and falls back to library defaults. Unknown
//! keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use uatrack::geometry::IouKind;
use uatrack::metrics::EvalConfig;
use uatrack::scoring::{Aggregate, NmsConfig, ScoreMapConfig, ScoreStrategy};
use uatrack::sim::ScenarioConfig;
use uatrack::tracker::{TrackerConfig, UkfParams};
use uatrack::BoxVariance;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub tracker: TrackerSection,
    pub scoring: ScoringSection,
    pub nms: NmsSection,
    pub eval: EvalSection,
    pub scenario: ScenarioSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerSection {
    pub gate_distance: f64,
    pub t_init: u32,
    pub t_drop: u32,
    pub process_noise: [f64; 6],
    /// Standard deviation per box parameter when detections carry no variance.
    pub default_obs_sigma: [f64; 7],
    pub use_detection_covariance: bool,
    pub initial_motion_variance: [f64; 3],
    pub ukf_alpha: f64,
    pub ukf_beta: f64,
    pub ukf_kappa: f64,
    pub score_smoothing: f64,
}

impl Default for TrackerSection {
    fn default() -> Self {
        let c = TrackerConfig::default();
        Self {
            gate_distance: c.gate_distance,
            t_init: c.t_init,
            t_drop: c.t_drop,
            process_noise: c.process_noise,
            default_obs_sigma: c.default_obs_noise.to_array().map(f64::sqrt),
            use_detection_covariance: c.use_detection_covariance,
            initial_motion_variance: c.initial_motion_variance,
            ukf_alpha: c.ukf.alpha,
            ukf_beta: c.ukf.beta,
            ukf_kappa: c.ukf.kappa,
            score_smoothing: c.score_smoothing,
        }
    }
}

impl TrackerSection {
    pub fn to_core(&self) -> TrackerConfig {
        TrackerConfig {
            gate_distance: self.gate_distance,
            t_init: self.t_init,
            t_drop: self.t_drop,
            process_noise: self.process_noise,
            default_obs_noise: BoxVariance::from_array(self.default_obs_sigma.map(|s| s * s)),
            use_detection_covariance: self.use_detection_covariance,
            initial_motion_variance: self.initial_motion_variance,
            ukf: UkfParams {
                alpha: self.ukf_alpha,
                beta: self.ukf_beta,
                kappa: self.ukf_kappa,
            },
            score_smoothing: self.score_smoothing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    None,
    Linear,
    Exponential,
    Sigmoid,
}

impl From<StrategyName> for ScoreStrategy {
    fn from(s: StrategyName) -> Self {
        match s {
            StrategyName::None => ScoreStrategy::None,
            StrategyName::Linear => ScoreStrategy::Linear,
            StrategyName::Exponential => ScoreStrategy::Exponential,
            StrategyName::Sigmoid => ScoreStrategy::Sigmoid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregateName {
    Max,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IouName {
    #[serde(rename = "bev")]
    Bev,
    #[serde(rename = "3d")]
    ThreeD,
}

impl From<IouName> for IouKind {
    fn from(k: IouName) -> Self {
        match k {
            IouName::Bev => IouKind::Bev,
            IouName::ThreeD => IouKind::ThreeD,
        }
    }
}

impl From<IouKind> for IouName {
    fn from(k: IouKind) -> Self {
        match k {
            IouKind::Bev => IouName::Bev,
            IouKind::ThreeD => IouName::ThreeD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub strategy: StrategyName,
    pub k_s: f64,
    pub b_s: f64,
    pub aggregate: AggregateName,
    pub alpha: f64,
}

impl Default for ScoringSection {
    fn default() -> Self {
        let c = ScoreMapConfig::default();
        Self {
            strategy: StrategyName::None,
            k_s: c.k_s,
            b_s: c.b_s,
            aggregate: match c.aggregate {
                Aggregate::Max => AggregateName::Max,
                Aggregate::Sum => AggregateName::Sum,
            },
            alpha: c.alpha,
        }
    }
}

impl ScoringSection {
    pub fn to_core(&self) -> ScoreMapConfig {
        ScoreMapConfig {
            strategy: self.strategy.into(),
            k_s: self.k_s,
            b_s: self.b_s,
            aggregate: match self.aggregate {
                AggregateName::Max => Aggregate::Max,
                AggregateName::Sum => Aggregate::Sum,
            },
            alpha: self.alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmsSection {
    pub iou_threshold: f64,
    pub pre_top_k: usize,
    pub iou_kind: IouName,
}

impl Default for NmsSection {
    fn default() -> Self {
        let c = NmsConfig::default();
        Self {
            iou_threshold: c.iou_threshold,
            pre_top_k: c.pre_top_k,
            iou_kind: c.iou_kind.into(),
        }
    }
}

impl NmsSection {
    pub fn to_core(&self) -> NmsConfig {
        NmsConfig {
            iou_threshold: self.iou_threshold,
            pre_top_k: self.pre_top_k,
            iou_kind: self.iou_kind.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub iou_threshold: f64,
    pub iou_kind: IouName,
    pub recall_points: usize,
}

impl Default for EvalSection {
    /// Tracking-oriented default: BEV IoU at 0.5.
    fn default() -> Self {
        let c = EvalConfig::default();
        Self {
            iou_threshold: 0.5,
            iou_kind: IouName::Bev,
            recall_points: c.recall_points,
        }
    }
}

impl EvalSection {
    pub fn to_core(&self) -> EvalConfig {
        EvalConfig {
            iou_threshold: self.iou_threshold,
            iou_kind: self.iou_kind.into(),
            recall_points: self.recall_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub n_targets: usize,
    pub n_frames: usize,
    pub dt: f64,
    pub field_extent: f64,
    pub noise_base: [f64; 7],
    pub noise_range_coeff: [f64; 7],
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub fn_range_coeff: f64,
    pub miscalibration_factor: f64,
    pub speed_range: [f64; 2],
    pub perturb_prob: f64,
    pub accel_sigma: f64,
    pub turn_rate_sigma: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let c = ScenarioConfig::default();
        Self {
            n_targets: c.n_targets,
            n_frames: c.n_frames,
            dt: c.dt,
            field_extent: c.field_extent,
            noise_base: c.noise_base,
            noise_range_coeff: c.noise_range_coeff,
            fp_rate: c.fp_rate,
            fn_rate: c.fn_rate,
            fn_range_coeff: c.fn_range_coeff,
            miscalibration_factor: c.miscalibration_factor,
            speed_range: [c.speed_range.0, c.speed_range.1],
            perturb_prob: c.perturb_prob,
            accel_sigma: c.accel_sigma,
            turn_rate_sigma: c.turn_rate_sigma,
        }
    }
}

impl ScenarioSection {
    pub fn to_core(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_targets: self.n_targets,
            n_frames: self.n_frames,
            dt: self.dt,
            field_extent: self.field_extent,
            noise_base: self.noise_base,
            noise_range_coeff: self.noise_range_coeff,
            fp_rate: self.fp_rate,
            fn_rate: self.fn_rate,
            fn_range_coeff: self.fn_range_coeff,
            miscalibration_factor: self.miscalibration_factor,
            speed_range: (self.speed_range[0], self.speed_range[1]),
            perturb_prob: self.perturb_prob,
            accel_sigma: self.accel_sigma,
            turn_rate_sigma: self.turn_rate_sigma,
            seed,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> uatrack::Result<()> {
        let doc = toml::Value::try_from(self).map_err(|e| uatrack::Error::Config(e.to_string()))?;
        if let Some(key) = first_non_finite(&doc, "") {
            return Err(uatrack::Error::Config(format!("`{key}` must be finite")));
        }
        self.tracker.to_core().validate()?;
        self.scoring.to_core().validate()?;
        self.nms.to_core().validate()?;
        self.eval.to_core().validate()?;
        self.scenario.to_core(self.seed).validate()
    }

    /// Applies `key=value` overrides with dotted keys such as `tracker.t_init`.
    ///
    /// A scalar assigned to an array key fills every element.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> anyhow::Result<Self> {
        let mut doc: toml::Table = toml::from_str(&self.to_toml())?;
        for (key, raw) in overrides {
            set_dotted(&mut doc, key, raw)?;
        }
        let text = toml::to_string(&doc)?;
        Self::from_toml(&text)
    }
}

fn first_non_finite(v: &toml::Value, path: &str) -> Option<String> {
    match v {
        toml::Value::Float(f) if !f.is_finite() => Some(path.to_string()),
        toml::Value::Array(items) => items.iter().find_map(|i| first_non_finite(i, path)),
        toml::Value::Table(t) => t.iter().find_map(|(k, i)| {
            let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            first_non_finite(i, &key)
        }),
        _ => None,
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}

fn set_dotted(doc: &mut toml::Table, key: &str, raw: &str) -> anyhow::Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for s in sections {
        table = table
            .get_mut(*s)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| anyhow::anyhow!("unknown config section `{s}` in `{key}`"))?;
    }
    let current = table
        .get(*last)
        .ok_or_else(|| anyhow::anyhow!("unknown config key `{key}`"))?;
    let mut value = parse_scalar(raw);
    // integers are accepted where floats are expected
    let coerce = |v: toml::Value, like: &toml::Value| match (v, like) {
        (toml::Value::Integer(i), toml::Value::Float(_)) => toml::Value::Float(i as f64),
        (v, _) => v,
    };
    value = match current {
        toml::Value::Array(items) if !matches!(value, toml::Value::Array(_)) => {
            let filled: Vec<toml::Value> = items.iter().map(|like| coerce(value.clone(), like)).collect();
            toml::Value::Array(filled)
        }
        like => coerce(value, like),
    };
    table.insert(last.to_string(), value);
    Ok(())
}
