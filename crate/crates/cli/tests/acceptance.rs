//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, LN_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::LinearKf;
use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use uatrack::codec::{decode_box, decode_variance, encode_box, Anchor, EncodedLogVar, EncodedTarget};
use uatrack::geometry::{iou_bev, IouKind};
use uatrack::math::{bessel_i0, gaussian_nll, log_bessel_i0, von_mises_nll, GaussianNllConfig, VonMisesNllConfig};
use uatrack::metrics::{detection_pr, EvalConfig};
use uatrack::pipeline::compare_many;
use uatrack::scoring::{map_uncertainty_to_logscore, ScoreMapConfig, ScoreStrategy};
use uatrack::sim::{generate_scenario, ScenarioConfig};
use uatrack::tracker::{hungarian_assign, ukf_predict, ukf_update, Matrix6, PoseState, TrackerConfig, UkfParams, Vector6};
use uatrack::{normalize_angle, Box3D, BoxVariance};
use uatrack_cli::commands::nms_frame;
use uatrack_cli::config::StrategyName;
use uatrack_cli::formats::DetectionRecord;
use uatrack_cli::RunConfig;

const BIN: &str = env!("CARGO_BIN_EXE_uatrack");

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("loss correctness", loss_correctness),
        ("bessel accuracy", bessel_accuracy),
        ("regularization behavior", regularization_behavior),
        ("geometry oracle", geometry_oracle),
        ("assignment optimality", assignment_optimality),
        ("filter consistency", filter_consistency),
        ("variance propagation", variance_propagation),
        ("adaptive vs constant noise", adaptive_vs_constant),
        ("covariance sensitivity", covariance_sensitivity),
        ("uncertainty-aware nms", nms_scoring),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failures += usize::from(!v.passed);
        println!(
            "{} criterion {:>2} {name}: {} [{:.1}s]",
            if v.passed { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

fn loss_correctness() -> Verdict {
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(["check-losses", "--samples", "1000", "--seed", "2024"])
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    let all_pass = !lines.is_empty() && lines.iter().all(|l| l.starts_with("PASS"));
    verdict(
        out.status.success() && all_pass && elapsed < Duration::from_secs(5),
        format!(
            "{} checks, exit {:?}, {:.2}s (limit 5s)",
            lines.len(),
            out.status.code(),
            elapsed.as_secs_f64()
        ),
    )
}

fn bessel_accuracy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_series = 0.0_f64;
    for _ in 0..1000 {
        let k = rng.random_range(0.0..50.0);
        worst_series = worst_series.max((bessel_i0(k).unwrap() / common::i0_series(k) - 1.0).abs());
    }
    let mut worst_asym = 0.0_f64;
    let mut finite = true;
    for k in [100.0, 500.0, 700.0] {
        let v = log_bessel_i0(k).unwrap();
        finite &= v.is_finite();
        worst_asym = worst_asym.max((v / common::log_i0_asymptotic(k) - 1.0).abs());
    }
    verdict(
        worst_series < 1e-10 && finite && worst_asym < 1e-8,
        format!("series rel {worst_series:.2e} (< 1e-10), asymptotic rel {worst_asym:.2e} (< 1e-8)"),
    )
}

/// Root of `f` on `[lo, hi]` by bisection; `f(lo) < 0 < f(hi)`.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimizer of a smooth convex-in-a-bracket loss via the zero of its
/// central-difference slope.
fn argmin_by_slope<F: Fn(f64) -> f64>(f: F) -> f64 {
    let h = 1e-6;
    bisect(|s| (f(s + h) - f(s - h)) / (2.0 * h), -9.0, 9.0)
}

fn regularization_behavior() -> Verdict {
    let mut worst_shift = 0.0_f64;
    for d in [0.3, 1.0, 2.5] {
        for lambda in [0.5, 1.0, 2.0] {
            let at = |l: f64| {
                let cfg = GaussianNllConfig::new(l).unwrap();
                argmin_by_slope(|s| gaussian_nll(d, 0.0, s, cfg).value)
            };
            worst_shift = worst_shift.max((at(2.0 * lambda) - at(lambda) + LN_2).abs());
        }
    }
    let mut monotone = true;
    let mut minima = Vec::new();
    for cos in [-0.5_f64, 0.2, 0.5, 0.9] {
        let m: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&lv| {
                let cfg = VonMisesNllConfig::new(lv, 1.0).unwrap();
                argmin_by_slope(|s| von_mises_nll(cos.acos(), 0.0, s, cfg).value)
            })
            .collect();
        monotone &= m.windows(2).all(|w| w[1] < w[0]);
        minima.push(m);
    }
    verdict(
        worst_shift < 1e-6 && monotone,
        format!(
            "gaussian shift err {worst_shift:.2e} (< 1e-6), von-Mises argmin strictly decreasing: {monotone} (cos 0.5: {:.3?})",
            minima[2]
        ),
    )
}

fn geometry_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0_f64;
    let mut compared = 0;
    while compared < 500 {
        let mut rand_box = |spread: f64| {
            Box3D::new(
                [rng.random_range(-spread..spread), rng.random_range(-spread..spread), 0.0],
                [rng.random_range(0.5..3.0), rng.random_range(0.5..6.0), 1.0],
                rng.random_range(-3.2..3.2),
            )
        };
        let a = rand_box(0.5);
        let b = rand_box(2.0);
        let ca = common::rect_corners(a.x, a.y, a.w, a.l, a.theta);
        let cb = common::rect_corners(b.x, b.y, b.w, b.l, b.theta);
        let inter = common::raster_intersection_area(&ca, &cb, 1e-3);
        let oracle = inter / (a.bev_area() + b.bev_area() - inter);
        if oracle < 0.01 {
            continue;
        }
        worst = worst.max((iou_bev(&a, &b) - oracle).abs() / oracle);
        compared += 1;
    }
    let sq = Box3D::new([0.0; 3], [1.0, 1.0, 1.0], 0.0);
    let octagon = iou_bev(&sq, &Box3D::new([0.0; 3], [1.0, 1.0, 1.0], FRAC_PI_4));
    verdict(
        worst < 5e-3 && (octagon - FRAC_1_SQRT_2).abs() < 1e-6 && format!("{octagon:.5}") == "0.70711",
        format!("worst rel err {worst:.2e} over 500 pairs (< 0.5%), octagon IoU {octagon:.8} (1/sqrt 2)"),
    )
}

fn assignment_optimality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for n in 2..=7 {
        for _ in 0..100 {
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(0..1000) as f64).collect())
                .collect();
            let pairs = hungarian_assign(&cost);
            let total: f64 = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
            if pairs.len() != n || total != common::brute_force_min_cost(&cost) {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} mismatches over 600 matrices (n = 2..7)"))
}

fn filter_consistency() -> Verdict {
    let heading = -1.1;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut ukf = PoseState::new(
        Vector6::new(-3.0, 4.0, heading, 7.0, 0.0, 0.0),
        Matrix6::from_diagonal(&Vector6::new(0.8, 0.3, 0.0, 4.0, 0.0, 0.0)),
    );
    let mut kf = LinearKf {
        m: Vector3::new(-3.0, 4.0, 7.0),
        p: Matrix3::from_diagonal(&Vector3::new(0.8, 0.3, 4.0)),
        heading,
    };
    let q6 = Matrix6::from_diagonal(&Vector6::new(0.05, 0.01, 0.0, 0.3, 0.0, 0.0));
    let q3 = Matrix3::from_diagonal(&Vector3::new(0.05, 0.01, 0.3));
    let params = UkfParams::default();
    let mut worst_linear = 0.0_f64;
    for _ in 0..100 {
        let dt = rng.random_range(0.05..0.2);
        ukf = ukf_predict(&ukf, dt, &q6, &params);
        kf.predict(dt, &q3);
        let z = Vector2::new(ukf.x() + rng.random_range(-1.0..1.0), ukf.y() + rng.random_range(-1.0..1.0));
        let r = Vector2::new(rng.random_range(0.1..1.0), rng.random_range(0.1..1.0));
        ukf = ukf_update(&ukf, &Vector3::new(z[0], z[1], heading), &Vector3::new(r[0], r[1], 0.2)).unwrap();
        kf.update(z, r);
        for (i, &a) in [0, 1, 3].iter().enumerate() {
            worst_linear = worst_linear.max((ukf.mean[a] - kf.m[i]).abs());
            for (j, &b) in [0, 1, 3].iter().enumerate() {
                worst_linear = worst_linear.max((ukf.covariance[(a, b)] - kf.p[(i, j)]).abs());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let q = Matrix6::from_diagonal(&Vector6::new(0.01, 0.01, 0.01, 0.5, 2.0, 0.1));
    let mut state = PoseState::new(
        Vector6::new(0.0, 0.0, 0.0, 5.0, 0.0, 0.1),
        Matrix6::from_diagonal(&Vector6::new(1.0, 1.0, 0.1, 100.0, 9.0, 0.25)),
    );
    let (mut worst_asym, mut min_eig) = (0.0_f64, f64::INFINITY);
    for _ in 0..10_000 {
        state = ukf_predict(&state, rng.random_range(0.01..0.5), &q, &params);
        if rng.random_bool(0.8) {
            let z = Vector3::new(
                state.x() + rng.random_range(-2.0..2.0),
                state.y() + rng.random_range(-2.0..2.0),
                rng.random_range(-3.2..3.2),
            );
            let r = Vector3::from_fn(|_, _| 10f64.powf(rng.random_range(-4.0..1.0)));
            state = ukf_update(&state, &z, &r).unwrap();
        }
        if state.mean.iter().any(|v| v.abs() > 1e4) || state.covariance.abs().max() > 1e8 {
            state = PoseState::new(Vector6::zeros(), Matrix6::identity());
        }
        worst_asym = worst_asym.max(state.asymmetry());
        min_eig = min_eig.min(state.min_eigenvalue());
    }
    verdict(
        worst_linear < 1e-8 && worst_asym < 1e-9 && min_eig > -1e-9,
        format!("UKF vs KF max diff {worst_linear:.2e} (< 1e-8); 1e4 steps: asym {worst_asym:.1e}, min eig {min_eig:.2e}"),
    )
}

fn variance_propagation() -> Verdict {
    const N: usize = 1_000_000;
    let sigma_t: f64 = 0.05;
    let anchor = Anchor::new([-6.0, 12.0, -1.0], [1.6, 3.9, 1.56], -0.8).unwrap();
    let gt = Box3D::new([-5.4, 12.5, -0.9], [1.7, 4.4, 1.6], -0.6);
    let mean = encode_box(&gt, &anchor).unwrap();
    let center = decode_box(&mean, &anchor).params();
    let s = EncodedLogVar::uniform((sigma_t * sigma_t).ln());
    let predicted = decode_variance(&s, &anchor, &decode_box(&mean, &anchor)).to_array();

    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let noise = Normal::new(0.0, sigma_t).unwrap();
    let (mut sum, mut sum_sq) = ([0.0; 7], [0.0; 7]);
    let base = mean.to_array();
    for _ in 0..N {
        let p = decode_box(&EncodedTarget::from_array(base.map(|m| m + noise.sample(&mut rng))), &anchor).params();
        for i in 0..7 {
            let d = if i == 6 { normalize_angle(p[i] - center[i]) } else { p[i] - center[i] };
            sum[i] += d;
            sum_sq[i] += d * d;
        }
    }
    let n = N as f64;
    let rel: [f64; 7] = std::array::from_fn(|i| ((sum_sq[i] / n - (sum[i] / n).powi(2)) / predicted[i] - 1.0).abs());
    let sampling = 4.0 * (2.0 / n).sqrt();
    let linear = [0, 1, 2, 6].iter().map(|&i| rel[i]).fold(0.0, f64::max);
    let dims = [3, 4, 5].iter().map(|&i| rel[i]).fold(0.0, f64::max);
    verdict(
        linear < sampling && dims < 0.05,
        format!("linear rel {linear:.2e} (< {sampling:.2e}), log-dim rel {dims:.3} (< 0.05)"),
    )
}

const SIGMA_GRID: [f64; 5] = [0.05, 0.1, 0.3, 1.0, 3.0];

fn tracking_eval() -> EvalConfig {
    EvalConfig {
        iou_threshold: 0.5,
        iou_kind: IouKind::Bev,
        recall_points: 40,
    }
}

/// Runs the 20-scenario comparison once and shares it between criteria 8 and 9.
fn comparisons() -> &'static (Vec<uatrack::pipeline::Comparison>, Duration, f64) {
    static CELL: std::sync::OnceLock<(Vec<uatrack::pipeline::Comparison>, Duration, f64)> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let base = ScenarioConfig::default();
        let spread = {
            let near = base.noise_sigma(0.0);
            let far = base.noise_sigma(base.max_range());
            (0..7).map(|i| far[i] / near[i]).fold(f64::INFINITY, f64::min)
        };
        let scenarios: Vec<_> = (0..20)
            .map(|seed| generate_scenario(&ScenarioConfig { seed, ..base.clone() }).unwrap())
            .collect();
        let cmp = compare_many(&scenarios, &TrackerConfig::default(), &SIGMA_GRID, &tracking_eval()).unwrap();
        (cmp, start.elapsed(), spread)
    })
}

fn adaptive_vs_constant() -> Verdict {
    let (cmp, elapsed, spread) = comparisons();
    let rmse_wins = cmp
        .iter()
        .filter(|c| c.adaptive.position_rmse <= 0.9 * c.best_baseline_rmse())
        .count();
    let mota_wins = cmp.iter().filter(|c| c.adaptive.report.mota > c.best_baseline_mota()).count();
    let ratio: f64 = cmp.iter().map(|c| c.adaptive.position_rmse / c.best_baseline_rmse()).sum::<f64>() / cmp.len() as f64;
    let mota_gap: f64 = cmp.iter().map(|c| c.adaptive.report.mota - c.best_baseline_mota()).sum::<f64>() / cmp.len() as f64;
    verdict(
        rmse_wins >= 18 && mota_wins >= 18 && elapsed.as_secs_f64() < 120.0 && *spread >= 4.0,
        format!(
            "RMSE >= 10% lower in {rmse_wins}/20 (mean ratio {ratio:.3}), MOTA higher in {mota_wins}/20 (mean gain {mota_gap:.2} pp), noise spread {spread:.1}x, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn covariance_sensitivity() -> Verdict {
    let (cmp, _, _) = comparisons();
    let pooled_min = SIGMA_GRID
        .iter()
        .enumerate()
        .map(|(k, _)| cmp.iter().map(|c| c.baselines[k].1.report.mota).sum::<f64>() / cmp.len() as f64)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m), hi.max(m)));
    let spread = pooled_min.1 - pooled_min.0;
    let per_scenario_min = cmp.iter().map(|c| c.baseline_mota_spread()).fold(f64::INFINITY, f64::min);
    verdict(
        spread > 10.0,
        format!(
            "mean MOTA over sigma grid spans {spread:.1} pp (> 10); smallest per-scenario spread {per_scenario_min:.1} pp"
        ),
    )
}

/// Frames where each object has a well-localized, low-variance proposal and a
/// duplicate shifted 1 m along its length with higher variance and a slightly
/// higher class score.
fn duplicate_proposals(frames: usize, seed: u64) -> (Vec<Vec<Box3D>>, Vec<Vec<DetectionRecord>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gt = Vec::new();
    let mut dets = Vec::new();
    for frame in 0..frames {
        let mut g = Vec::new();
        let mut d = Vec::new();
        for k in 0..4 {
            let b = Box3D::new(
                [12.0 * k as f64 + rng.random_range(-2.0..2.0), rng.random_range(-20.0..20.0), -0.8],
                [rng.random_range(1.5..1.9), rng.random_range(3.6..4.6), 1.5],
                rng.random_range(-3.1..3.1),
            );
            let score = rng.random_range(0.3..0.95);
            let sigma_good = rng.random_range(0.05..0.15);
            let sigma_poor = rng.random_range(0.6..1.2);
            let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.05..0.05);
            let good = Box3D {
                x: b.x + jitter(&mut rng),
                y: b.y + jitter(&mut rng),
                ..b
            }
            .with_score(score);
            let (s, c) = b.theta.sin_cos();
            let poor = Box3D {
                x: b.x + c,
                y: b.y + s,
                ..b
            }
            .with_score((score * 1.005).min(1.0));
            d.push(DetectionRecord {
                frame,
                bbox: good,
                variance: Some(BoxVariance::isotropic(sigma_good)),
            });
            d.push(DetectionRecord {
                frame,
                bbox: poor,
                variance: Some(BoxVariance::isotropic(sigma_poor)),
            });
            g.push(b);
        }
        gt.push(g);
        dets.push(d);
    }
    (gt, dets)
}

fn nms_scoring() -> Verdict {
    let (gt, dets) = duplicate_proposals(100, 77);
    let eval = EvalConfig::default();
    let ap_for = |strategy: StrategyName| {
        let mut cfg = RunConfig::default();
        cfg.scoring.strategy = strategy;
        cfg.scoring.k_s = 0.001;
        cfg.scoring.b_s = 0.0;
        let kept: Vec<Vec<Box3D>> = dets
            .iter()
            .map(|f| nms_frame(&cfg, f).unwrap().into_iter().map(|r| r.bbox).collect())
            .collect();
        detection_pr(&gt, &kept, &eval).ap
    };
    let c_only = ap_for(StrategyName::None);
    let mapped = [
        ("C+L", ap_for(StrategyName::Linear)),
        ("C+S", ap_for(StrategyName::Sigmoid)),
        ("C+E", ap_for(StrategyName::Exponential)),
    ];
    let none_worse = mapped.iter().all(|(_, ap)| *ap >= c_only);
    let one_better = mapped.iter().any(|(_, ap)| *ap > c_only);

    let mut runner = TestRunner::new(PropConfig {
        cases: 2000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let monotone = runner
        .run(&(-500.0..500.0f64, 0.0..200.0f64), |(g, dg)| {
            for strategy in [ScoreStrategy::Linear, ScoreStrategy::Sigmoid, ScoreStrategy::Exponential] {
                let cfg = ScoreMapConfig {
                    strategy,
                    k_s: 0.001,
                    b_s: 0.0,
                    ..Default::default()
                };
                let (lo, hi) = (map_uncertainty_to_logscore(g, &cfg), map_uncertainty_to_logscore(g + dg, &cfg));
                proptest::prop_assert!(hi <= lo);
            }
            Ok(())
        })
        .is_ok();
    verdict(
        none_worse && one_better && monotone,
        format!(
            "AP C {c_only:.2}, {} ; mappings non-increasing: {monotone}",
            mapped.iter().map(|(n, ap)| format!("{n} {ap:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn run_cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn pipeline_outputs(dir: &Path) -> Vec<Vec<u8>> {
    let d = |name: &str| dir.join(name).to_string_lossy().into_owned();
    run_cli(&["simulate", "--seed", "11", "--out-dir", &d("")]);
    run_cli(&["track", "--seed", "11", "--detections", &d("detections.csv"), "--out", &d("tracks.csv")]);
    let report = run_cli(&["eval-track", "--seed", "11", "--gt", &d("gt.csv"), "--tracks", &d("tracks.csv"), "--format", "csv"]);
    let mut files: Vec<Vec<u8>> = ["gt.csv", "detections.csv", "tracks.csv", "config.toml"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).unwrap())
        .collect();
    files.push(report);
    files
}

fn determinism() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline_outputs(a.path());
    let second = pipeline_outputs(b.path());
    let bytes: usize = first.iter().map(Vec::len).sum();
    verdict(
        first == second,
        format!("simulate -> track -> eval-track outputs identical: {} ({bytes} bytes)", first == second),
    )
}
