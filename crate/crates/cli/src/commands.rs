use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uatrack::codec::{encode_variance, Anchor, EncodedLogVar};
use uatrack::math::check::run_loss_checks;
use uatrack::math::{gaussian_nll, von_mises_nll, GaussianNllConfig, VonMisesNllConfig};
use uatrack::metrics::{detection_pr, evaluate_tracking, TrackedObject, TrackingReport};
use uatrack::pipeline::{evaluate_run, ground_truth_objects};
use uatrack::scoring::{nms_indices, rescore, ScoreStrategy};
use uatrack::sim::{generate_scenario, CovarianceSource, Scenario};
use uatrack::tracker::{Track, Tracker};
use uatrack::Box3D;

use crate::config::RunConfig;
use crate::formats::{
    detection_frames, format_real, read_detections_file, read_tracks_file, track_frames, write_detections_file,
    write_tracks_file, DetectionRecord, TrackRecord, VERSION_LINE,
};
use crate::kitti;

#[derive(Debug, Parser)]
#[command(name = "uatrack", version, about = "Uncertainty-aware 3D detection post-processing and tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    pub seed: Option<u64>,
}

impl Common {
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelFormat {
    Uatrack,
    Kitti,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scenario: ground truth and noisy detections.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
    /// Run the tracker over a detection file.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Ignore detection variance and use this σ on every parameter.
        #[arg(long, conflicts_with = "use_variance")]
        constant_sigma: Option<f64>,
        /// Require per-detection variance and feed it to the filter.
        #[arg(long)]
        use_variance: bool,
        #[arg(long)]
        n_frames: Option<usize>,
    },
    /// CLEAR-MOT and detection metrics of a track file.
    EvalTrack {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        #[arg(long, value_name = "FILE")]
        tracks: PathBuf,
        #[arg(long, value_enum, default_value = "uatrack")]
        gt_format: LabelFormat,
        #[arg(long, value_enum, default_value = "uatrack")]
        tracks_format: LabelFormat,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Interpolated AP and max F1 of a detection file.
    EvalDet {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        gt: PathBuf,
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_enum, default_value = "uatrack")]
        gt_format: LabelFormat,
        #[arg(long, value_enum, default_value = "uatrack")]
        det_format: LabelFormat,
        #[arg(long, value_enum, default_value = "text")]
        format: ReportFormat,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Uncertainty-aware rescoring followed by NMS.
    Nms {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE")]
        detections: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Verify loss gradients and minima numerically.
    CheckLosses {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Simulate, track and evaluate over a grid of configuration values.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `section.key=v1,v2,...`; repeat for a product grid.
        #[arg(long, required = true, value_name = "KEY=VALUES")]
        grid: Vec<String>,
        /// `section.key=value` applied to every cell.
        #[arg(long, value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Scenarios per cell, seeded consecutively from the base seed.
        #[arg(long, default_value_t = 1)]
        scenarios: u64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Tabulate a loss as a function of the log-variance.
    PlotData {
        #[command(flatten)]
        common: Common,
        #[command(subcommand)]
        curve: Curve,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true, global = true)]
        s_min: f64,
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true, global = true)]
        s_max: f64,
        #[arg(long, default_value_t = 201, global = true)]
        points: usize,
        #[arg(long, value_name = "FILE", global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Curve {
    /// Gaussian NLL at squared residual `d2`.
    Gaussian {
        #[arg(long)]
        d2: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_g: f64,
    },
    /// von-Mises NLL at `cos(θ - θ_t)`.
    VonMises {
        #[arg(long, allow_negative_numbers = true)]
        cos: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_v: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        s0: f64,
    },
}

/// Runs a command and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Simulate { common, out_dir } => simulate(&common.load()?, &out_dir).map(|_| 0),
        Command::Track {
            common,
            detections,
            out,
            constant_sigma,
            use_variance,
            n_frames,
        } => track(&common.load()?, &detections, &out, constant_sigma, use_variance, n_frames).map(|_| 0),
        Command::EvalTrack {
            common,
            gt,
            tracks,
            gt_format,
            tracks_format,
            format,
            out,
        } => {
            let cfg = common.load()?;
            let gt = load_objects(&gt, gt_format)?;
            let pred = load_objects(&tracks, tracks_format)?;
            let (gt, pred) = align(gt, pred);
            let report = evaluate_tracking(&[(gt, pred)], &cfg.eval.to_core());
            emit(out.as_deref(), &tracking_report_rows(&report), format).map(|_| 0)
        }
        Command::EvalDet {
            common,
            gt,
            detections,
            gt_format,
            det_format,
            format,
            out,
        } => {
            let cfg = common.load()?;
            let gt = load_objects(&gt, gt_format)?;
            let pred = match det_format {
                LabelFormat::Uatrack => {
                    let recs = read_detections_file(&detections)?;
                    detection_frames(&recs, None)
                        .into_iter()
                        .map(|f| f.into_iter().map(|r| r.bbox).collect())
                        .collect()
                }
                LabelFormat::Kitti => boxes_of(&kitti::dense(&kitti::read_labels_file(&detections)?)),
            };
            let (gt, pred) = align(boxes_of(&gt), pred);
            let pr = detection_pr(&gt, &pred, &cfg.eval.to_core());
            let rows = vec![("ap".to_string(), format_real(pr.ap)), ("max_f1".to_string(), format_real(pr.max_f1))];
            emit(out.as_deref(), &rows, format).map(|_| 0)
        }
        Command::Nms {
            common,
            detections,
            out,
        } => nms(&common.load()?, &detections, &out).map(|_| 0),
        Command::CheckLosses { common, samples } => check_losses(&common.load()?, samples),
        Command::Sweep {
            common,
            grid,
            set,
            scenarios,
            out,
        } => sweep(&common.load()?, &grid, &set, scenarios, out.as_deref()).map(|_| 0),
        Command::PlotData {
            common,
            curve,
            s_min,
            s_max,
            points,
            out,
        } => {
            common.load()?;
            plot_data(curve, s_min, s_max, points, out.as_deref()).map(|_| 0)
        }
    }
}

fn boxes_of(frames: &[Vec<TrackedObject>]) -> Vec<Vec<Box3D>> {
    frames.iter().map(|f| f.iter().map(|o| o.bbox).collect()).collect()
}

/// Pads both sequences to the same number of frames.
fn align<T: Clone>(mut a: Vec<Vec<T>>, mut b: Vec<Vec<T>>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let n = a.len().max(b.len());
    a.resize(n, Vec::new());
    b.resize(n, Vec::new());
    (a, b)
}

fn load_objects(path: &Path, format: LabelFormat) -> Result<Vec<Vec<TrackedObject>>> {
    Ok(match format {
        LabelFormat::Uatrack => track_frames(&read_tracks_file(path)?, None),
        LabelFormat::Kitti => kitti::dense(&kitti::read_labels_file(path)?),
    })
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(std::io::BufWriter::new(
            fs::File::create(path).with_context(|| path.display().to_string())?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Writes `name = value` lines or a header row plus one value row.
fn emit(out: Option<&Path>, rows: &[(String, String)], format: ReportFormat) -> Result<()> {
    let mut w = writer(out)?;
    writeln!(w, "{VERSION_LINE}")?;
    match format {
        ReportFormat::Text => {
            for (k, v) in rows {
                writeln!(w, "{k} = {v}")?;
            }
        }
        ReportFormat::Csv => {
            let names: Vec<&str> = rows.iter().map(|(k, _)| k.as_str()).collect();
            let values: Vec<&str> = rows.iter().map(|(_, v)| v.as_str()).collect();
            writeln!(w, "{}", names.join(","))?;
            writeln!(w, "{}", values.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn tracking_report_rows(r: &TrackingReport) -> Vec<(String, String)> {
    let c = &r.counts;
    [
        ("ap", format_real(r.ap)),
        ("max_f1", format_real(r.max_f1)),
        ("idsw", r.idsw.to_string()),
        ("frag", r.frag.to_string()),
        ("ml", format_real(r.ml)),
        ("mota", format_real(r.mota)),
        ("gt_objects", c.gt_objects.to_string()),
        ("true_positives", c.true_positives.to_string()),
        ("false_positives", c.false_positives.to_string()),
        ("misses", c.misses.to_string()),
        ("gt_tracks", c.gt_tracks.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

pub fn scenario_of(cfg: &RunConfig) -> Result<Scenario> {
    Ok(generate_scenario(&cfg.scenario.to_core(cfg.seed))?)
}

fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    let scenario = scenario_of(cfg)?;
    fs::create_dir_all(out_dir).with_context(|| out_dir.display().to_string())?;
    let gt: Vec<TrackRecord> = ground_truth_objects(&scenario)
        .into_iter()
        .enumerate()
        .flat_map(|(frame, objs)| objs.into_iter().map(move |object| TrackRecord { frame, object }))
        .collect();
    let dets: Vec<DetectionRecord> = scenario
        .detections
        .iter()
        .enumerate()
        .flat_map(|(frame, ds)| {
            ds.iter().map(move |d| DetectionRecord {
                frame,
                bbox: d.bbox,
                variance: Some(d.reported_variance),
            })
        })
        .collect();
    write_tracks_file(&out_dir.join("gt.csv"), &gt)?;
    write_detections_file(&out_dir.join("detections.csv"), &dets)?;
    fs::write(out_dir.join("config.toml"), cfg.to_toml())?;
    Ok(())
}

/// Confirmed tracks of every frame of a detection file.
pub fn run_tracker_on(
    cfg: &RunConfig,
    records: &[DetectionRecord],
    constant_sigma: Option<f64>,
    use_variance: bool,
    n_frames: Option<usize>,
) -> Result<Vec<Vec<Track>>> {
    let mut tcfg = cfg.tracker.to_core();
    if let Some(sigma) = constant_sigma {
        if !(sigma > 0.0 && sigma.is_finite()) {
            bail!("--constant-sigma must be > 0, got {sigma}");
        }
        tcfg = tcfg.constant_sigma(sigma);
    } else if use_variance {
        if records.iter().any(|r| r.variance.is_none()) {
            bail!("--use-variance requires variance columns in the detection file");
        }
        tcfg.use_detection_covariance = true;
    }
    let mut tracker = Tracker::new(tcfg)?;
    let dt = cfg.scenario.dt;
    detection_frames(records, n_frames)
        .iter()
        .map(|frame| {
            let dets: Vec<_> = frame.iter().map(DetectionRecord::to_detection).collect();
            Ok(tracker.step(&dets, dt)?)
        })
        .collect()
}

fn track(
    cfg: &RunConfig,
    detections: &Path,
    out: &Path,
    constant_sigma: Option<f64>,
    use_variance: bool,
    n_frames: Option<usize>,
) -> Result<()> {
    let records = read_detections_file(detections)?;
    let frames = run_tracker_on(cfg, &records, constant_sigma, use_variance, n_frames)?;
    let rows: Vec<TrackRecord> = frames
        .iter()
        .enumerate()
        .flat_map(|(frame, tracks)| {
            tracks.iter().map(move |t| TrackRecord {
                frame,
                object: TrackedObject { id: t.id, bbox: t.to_box() },
            })
        })
        .collect();
    write_tracks_file(out, &rows)?;
    Ok(())
}

/// Rescores and suppresses one frame of detections.
pub fn nms_frame(cfg: &RunConfig, frame: &[DetectionRecord]) -> Result<Vec<DetectionRecord>> {
    let score_cfg = cfg.scoring.to_core();
    let boxes: Vec<Box3D> = frame.iter().map(|r| r.bbox).collect();
    let rescored = if score_cfg.strategy == ScoreStrategy::None {
        boxes
    } else {
        let log_vars = frame
            .iter()
            .map(|r| {
                let var = r
                    .variance
                    .ok_or_else(|| anyhow::anyhow!("frame {}: rescoring requires variance columns", r.frame))?;
                Ok(encode_variance(&var, &Anchor::for_box(&r.bbox), &r.bbox)?)
            })
            .collect::<Result<Vec<EncodedLogVar>>>()?;
        rescore(&boxes, &log_vars, &score_cfg)
    };
    let keep = nms_indices(&rescored, &cfg.nms.to_core());
    Ok(keep
        .into_iter()
        .map(|i| DetectionRecord {
            bbox: rescored[i],
            ..frame[i]
        })
        .collect())
}

fn nms(cfg: &RunConfig, detections: &Path, out: &Path) -> Result<()> {
    let records = read_detections_file(detections)?;
    let mut kept = Vec::new();
    for frame in detection_frames(&records, None) {
        kept.extend(nms_frame(cfg, &frame)?);
    }
    write_detections_file(out, &kept)?;
    Ok(())
}

fn check_losses(cfg: &RunConfig, samples: usize) -> Result<i32> {
    let outcomes = run_loss_checks(samples, cfg.seed);
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag} {} worst={:.3e} {}", o.name, o.worst, o.detail)?;
        failed += usize::from(!o.passed);
    }
    writeln!(out, "{} of {} checks passed", outcomes.len() - failed, outcomes.len())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

fn parse_assignment(raw: &str) -> Result<(String, String)> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| anyhow::anyhow!("expected KEY=VALUE, got `{raw}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Evaluates one configuration over `scenarios` consecutive seeds.
pub fn sweep_cell(cfg: &RunConfig, scenarios: u64) -> Result<(TrackingReport, f64)> {
    let mut sequences = Vec::new();
    let (mut sq_sum, mut n) = (0.0, 0usize);
    for k in 0..scenarios {
        let scenario = generate_scenario(&cfg.scenario.to_core(cfg.seed + k))?;
        let mut tracker = Tracker::new(cfg.tracker.to_core())?;
        let frames = (0..scenario.n_frames())
            .map(|f| tracker.step(&scenario.frame_detections(f, CovarianceSource::Reported), scenario.config.dt))
            .collect::<uatrack::Result<Vec<_>>>()?;
        let outcome = evaluate_run(&scenario, &frames, &cfg.eval.to_core());
        if outcome.rmse_samples > 0 {
            sq_sum += outcome.position_rmse.powi(2) * outcome.rmse_samples as f64;
            n += outcome.rmse_samples;
        }
        sequences.push((ground_truth_objects(&scenario), uatrack::pipeline::track_objects(&frames)));
    }
    let report = evaluate_tracking(&sequences, &cfg.eval.to_core());
    let rmse = if n == 0 { f64::NAN } else { (sq_sum / n as f64).sqrt() };
    Ok((report, rmse))
}

fn sweep(cfg: &RunConfig, grid: &[String], set: &[String], scenarios: u64, out: Option<&Path>) -> Result<()> {
    if scenarios == 0 {
        bail!("--scenarios must be >= 1");
    }
    let fixed = set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    let base = cfg.with_overrides(&fixed)?;
    let axes = grid
        .iter()
        .map(|g| {
            let (k, vs) = parse_assignment(g)?;
            let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                bail!("grid key `{k}` has no values");
            }
            Ok((k, values))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = writer(out)?;
    writeln!(w, "{VERSION_LINE}")?;
    let mut header: Vec<String> = axes.iter().map(|(k, _)| k.clone()).collect();
    header.extend(["ap", "max_f1", "idsw", "frag", "ml", "mota", "position_rmse"].map(String::from));
    writeln!(w, "{}", header.join(","))?;

    let cells: usize = axes.iter().map(|(_, v)| v.len()).product();
    for cell in 0..cells {
        let mut rem = cell;
        let mut assignment = Vec::with_capacity(axes.len());
        for (k, values) in axes.iter().rev() {
            assignment.push((k.clone(), values[rem % values.len()].clone()));
            rem /= values.len();
        }
        assignment.reverse();
        let cell_cfg = base.with_overrides(&assignment)?;
        let (r, rmse) = sweep_cell(&cell_cfg, scenarios)?;
        let mut row: Vec<String> = assignment.into_iter().map(|(_, v)| v).collect();
        row.extend([
            format_real(r.ap),
            format_real(r.max_f1),
            r.idsw.to_string(),
            r.frag.to_string(),
            format_real(r.ml),
            format_real(r.mota),
            format_real(rmse),
        ]);
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// `(s, loss)` samples of a loss curve on an even grid.
pub fn loss_curve(curve: Curve, s_min: f64, s_max: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 || !(s_max > s_min) {
        bail!("need s_max > s_min and at least 2 points");
    }
    let f: Box<dyn Fn(f64) -> f64> = match curve {
        Curve::Gaussian { d2, lambda_g } => {
            if !(d2 >= 0.0) {
                bail!("--d2 must be >= 0");
            }
            let c = GaussianNllConfig::new(lambda_g)?;
            Box::new(move |s| gaussian_nll(d2.sqrt(), 0.0, s, c).value)
        }
        Curve::VonMises { cos, lambda_v, s0 } => {
            if !(-1.0..=1.0).contains(&cos) {
                bail!("--cos must lie in [-1, 1]");
            }
            let c = VonMisesNllConfig::new(lambda_v, s0)?;
            Box::new(move |s| von_mises_nll(cos.acos(), 0.0, s, c).value)
        }
    };
    let step = (s_max - s_min) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            let s = if i + 1 == points { s_max } else { s_min + step * i as f64 };
            (s, f(s))
        })
        .collect())
}

fn plot_data(curve: Curve, s_min: f64, s_max: f64, points: usize, out: Option<&Path>) -> Result<()> {
    let rows = loss_curve(curve, s_min, s_max, points)?;
    let mut w = writer(out)?;
    writeln!(w, "{VERSION_LINE}")?;
    writeln!(w, "s,loss")?;
    for (s, v) in rows {
        writeln!(w, "{},{}", format_real(s), format_real(v))?;
    }
    w.flush()?;
    Ok(())
}
