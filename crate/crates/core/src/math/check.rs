//! Self-checks for the loss functions: analytic gradients against central
//! finite differences, and minimizer locations against their closed forms.
//!
//! These back the `check-losses` command and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bessel::ratio_unchecked;
use super::loss::{gaussian_nll, von_mises_nll, GaussianNllConfig, VonMisesNllConfig};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-6;
pub const GRAD_ABS_TOL: f64 = 1e-8;

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn grad_close(analytic: f64, numeric: f64) -> bool {
    let abs = (analytic - numeric).abs();
    abs < GRAD_ABS_TOL || abs / analytic.abs().max(numeric.abs()) < GRAD_REL_TOL
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed discrepancy of the check.
    pub worst: f64,
    pub detail: String,
}

/// Analytic vs. finite-difference gradients of the Gaussian NLL.
pub fn check_gaussian_gradients(samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let v: f64 = rng.random_range(-3.0..3.0);
        let vt: f64 = rng.random_range(-3.0..3.0);
        let s: f64 = rng.random_range(-4.0..4.0);
        let cfg = GaussianNllConfig {
            lambda_g: rng.random_range(0.1..3.0),
        };
        let r = gaussian_nll(v, vt, s, cfg);
        let dv = central_difference(|x| gaussian_nll(x, vt, s, cfg).value, v, FD_STEP);
        let ds = central_difference(|x| gaussian_nll(v, vt, x, cfg).value, s, FD_STEP);
        for (a, n) in [(r.d_value, dv), (r.d_s, ds)] {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-300));
            if !grad_close(a, n) {
                failures += 1;
            }
        }
    }
    CheckOutcome {
        name: "gaussian_gradients",
        passed: failures == 0,
        worst,
        detail: format!("{samples} samples, {failures} mismatches"),
    }
}

/// Analytic vs. finite-difference gradients of the von-Mises NLL.
pub fn check_von_mises_gradients(samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut worst = 0.0_f64;
    let mut n = 0;
    while n < samples {
        let th: f64 = rng.random_range(-4.0..4.0);
        let tt: f64 = rng.random_range(-4.0..4.0);
        let s: f64 = rng.random_range(-4.0..4.0);
        let cfg = VonMisesNllConfig {
            lambda_v: rng.random_range(0.0..3.0),
            s0: rng.random_range(-2.0..2.0),
        };
        // ELU is only C1 at its knot, so skip points whose stencil straddles it
        if (s - cfg.s0).abs() < 10.0 * FD_STEP {
            continue;
        }
        n += 1;
        let r = von_mises_nll(th, tt, s, cfg);
        let dv = central_difference(|x| von_mises_nll(x, tt, s, cfg).value, th, FD_STEP);
        let ds = central_difference(|x| von_mises_nll(th, tt, x, cfg).value, s, FD_STEP);
        for (a, n) in [(r.d_value, dv), (r.d_s, ds)] {
            worst = worst.max((a - n).abs() / a.abs().max(n.abs()).max(1e-300));
            if !grad_close(a, n) {
                failures += 1;
            }
        }
    }
    CheckOutcome {
        name: "von_mises_gradients",
        passed: failures == 0,
        worst,
        detail: format!("{samples} samples, {failures} mismatches"),
    }
}

/// Numerical minimizer of the Gaussian NLL over `s` for residual `d`.
pub fn gaussian_argmin_s(d: f64, lambda_g: f64) -> f64 {
    let cfg = GaussianNllConfig { lambda_g };
    golden_section_min(|s| gaussian_nll(d, 0.0, s, cfg).value, -9.5, 9.5, 1e-10)
}

/// Numerical minimizer of the von-Mises NLL over `s` for a residual with
/// the given cosine.
pub fn von_mises_argmin_s(cos_delta: f64, cfg: VonMisesNllConfig) -> f64 {
    let delta = cos_delta.acos();
    golden_section_min(|s| von_mises_nll(delta, 0.0, s, cfg).value, -9.5, 9.5, 1e-10)
}

/// Golden-section minimizer vs. `log(d² / λ_G)`.
pub fn check_gaussian_minimum() -> CheckOutcome {
    let mut worst = 0.0_f64;
    for d in [0.1, 0.5, 1.0, 2.0, 5.0] {
        for lambda in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let found = gaussian_argmin_s(d, lambda);
            let closed = (d * d / lambda).ln();
            worst = worst.max((found - closed).abs());
        }
    }
    CheckOutcome {
        name: "gaussian_minimum",
        passed: worst < 1e-6,
        worst,
        detail: "argmin_s vs log(d^2/lambda_g) on a 5x5 grid".into(),
    }
}

/// Doubling `λ_G` moves the minimizer by exactly `-log 2`.
pub fn check_gaussian_regularization_shift() -> CheckOutcome {
    let mut worst = 0.0_f64;
    for d in [0.5, 1.0, 3.0] {
        for lambda in [0.5, 1.0, 2.0] {
            let shift = gaussian_argmin_s(d, 2.0 * lambda) - gaussian_argmin_s(d, lambda);
            worst = worst.max((shift + std::f64::consts::LN_2).abs());
        }
    }
    CheckOutcome {
        name: "gaussian_lambda_shift",
        passed: worst < 1e-6,
        worst,
        detail: "argmin shift under lambda_g doubling vs -log 2".into(),
    }
}

/// With `λ_V = 0` the minimizing concentration solves `A(κ) = cos Δ`.
pub fn check_von_mises_stationarity() -> CheckOutcome {
    let mut worst = 0.0_f64;
    let cfg = VonMisesNllConfig {
        lambda_v: 0.0,
        s0: 1.0,
    };
    for c in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let s = von_mises_argmin_s(c, cfg);
        worst = worst.max((ratio_unchecked((-s).exp()) - c).abs());
    }
    CheckOutcome {
        name: "von_mises_stationarity",
        passed: worst < 1e-5,
        worst,
        detail: "A(kappa*) vs cos(delta) for cos in {0.1,...,0.9}".into(),
    }
}

/// Larger `λ_V` pulls the minimizer towards smaller `s`.
pub fn check_von_mises_regularization() -> CheckOutcome {
    let minima: Vec<f64> = [0.5, 1.0, 2.0]
        .iter()
        .map(|&lambda_v| von_mises_argmin_s(0.5, VonMisesNllConfig { lambda_v, s0: 1.0 }))
        .collect();
    let passed = minima.windows(2).all(|w| w[1] < w[0]);
    let worst = minima
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    CheckOutcome {
        name: "von_mises_lambda_monotone",
        passed,
        worst,
        detail: format!("argmin_s for lambda_v in {{0.5,1,2}}: {minima:?}"),
    }
}

/// Runs every loss check.
pub fn run_loss_checks(samples: usize, seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_gaussian_gradients(samples, seed),
        check_von_mises_gradients(samples, seed.wrapping_add(1)),
        check_gaussian_minimum(),
        check_gaussian_regularization_shift(),
        check_von_mises_stationarity(),
        check_von_mises_regularization(),
    ]
}
