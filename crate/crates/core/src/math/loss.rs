//! Regression losses with analytic first derivatives.
//!
//! Every loss returns a [`LossValueGrad`] holding the value together with
//! its partial derivatives with respect to the regressed parameter and the
//! log-variance `s`.

use crate::error::{Error, Result};

use super::bessel::{log_i0_unchecked, ratio_unchecked};

/// Log-variances are clamped to `[-LOG_VAR_CLAMP, LOG_VAR_CLAMP]` before
/// evaluation; `d_s` is zero outside that band.
pub const LOG_VAR_CLAMP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    /// Partial derivative with respect to the regressed parameter.
    pub d_value: f64,
    /// Partial derivative with respect to the log-variance.
    pub d_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianNllConfig {
    pub lambda_g: f64,
}

impl GaussianNllConfig {
    pub fn new(lambda_g: f64) -> Result<Self> {
        if !(lambda_g > 0.0 && lambda_g.is_finite()) {
            return Err(Error::Config(format!("lambda_g must be > 0, got {lambda_g}")));
        }
        Ok(Self { lambda_g })
    }
}

impl Default for GaussianNllConfig {
    fn default() -> Self {
        Self { lambda_g: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesNllConfig {
    pub lambda_v: f64,
    /// Offset of the ELU regularizer.
    pub s0: f64,
}

impl VonMisesNllConfig {
    pub fn new(lambda_v: f64, s0: f64) -> Result<Self> {
        if !(lambda_v >= 0.0 && lambda_v.is_finite()) {
            return Err(Error::Config(format!("lambda_v must be >= 0, got {lambda_v}")));
        }
        if !s0.is_finite() {
            return Err(Error::Config("s0 must be finite".into()));
        }
        Ok(Self { lambda_v, s0 })
    }
}

impl Default for VonMisesNllConfig {
    fn default() -> Self {
        Self {
            lambda_v: 1.0,
            s0: 1.0,
        }
    }
}

/// Weights of the assembled detector loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha_cls: f64,
    pub alpha_reg: f64,
    pub alpha_angle: f64,
    pub alpha_var: f64,
}

impl LossWeights {
    pub fn new(alpha_cls: f64, alpha_reg: f64, alpha_angle: f64, alpha_var: f64) -> Result<Self> {
        let w = Self {
            alpha_cls,
            alpha_reg,
            alpha_angle,
            alpha_var,
        };
        for (name, v) in [
            ("alpha_cls", alpha_cls),
            ("alpha_reg", alpha_reg),
            ("alpha_angle", alpha_angle),
            ("alpha_var", alpha_var),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(w)
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha_cls: 1.0,
            alpha_reg: 2.0,
            alpha_angle: 1.0,
            alpha_var: 1.0,
        }
    }
}

pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Derivative of [`elu`]; the right limit (1) is used at zero.
pub fn elu_derivative(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Returns the clamped log-variance and the derivative of the clamp.
fn clamp_log_var(s: f64) -> (f64, f64) {
    if s < -LOG_VAR_CLAMP {
        (-LOG_VAR_CLAMP, 0.0)
    } else if s > LOG_VAR_CLAMP {
        (LOG_VAR_CLAMP, 0.0)
    } else {
        (s, 1.0)
    }
}

/// Gaussian negative log-likelihood `½(exp(-s)(v - v_t)² + λ_G s)`.
pub fn gaussian_nll(v: f64, v_target: f64, s: f64, cfg: GaussianNllConfig) -> LossValueGrad {
    let (s, ds_clamp) = clamp_log_var(s);
    let precision = (-s).exp();
    let resid = v - v_target;
    let sq = resid * resid;
    LossValueGrad {
        value: 0.5 * (precision * sq + cfg.lambda_g * s),
        d_value: precision * resid,
        d_s: ds_clamp * 0.5 * (cfg.lambda_g - precision * sq),
    }
}

/// von-Mises negative log-likelihood with concentration `κ = exp(-s)` and
/// an ELU regularizer:
/// `log I₀(κ) - κ cos(θ - θ_t) + λ_V ELU(s - s₀)`.
///
/// Without the regularizer the loss has no minimum over `s` once
/// `cos(θ - θ_t) <= 0`; it decreases monotonically towards `s -> +inf`.
pub fn von_mises_nll(
    theta: f64,
    theta_target: f64,
    s: f64,
    cfg: VonMisesNllConfig,
) -> LossValueGrad {
    let (s, ds_clamp) = clamp_log_var(s);
    let kappa = (-s).exp();
    let (sin_d, cos_d) = (theta - theta_target).sin_cos();
    let reg = s - cfg.s0;
    LossValueGrad {
        value: log_i0_unchecked(kappa) - kappa * cos_d + cfg.lambda_v * elu(reg),
        d_value: kappa * sin_d,
        d_s: ds_clamp
            * (-kappa * (ratio_unchecked(kappa) - cos_d) + cfg.lambda_v * elu_derivative(reg)),
    }
}

/// Smooth L1 with transition at `|d| = 1`. Returns `(value, derivative)`.
pub fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

/// Smooth L1 applied to `sin(θ - θ_t)`. Blind to flips by π.
pub fn sine_error_loss(theta: f64, theta_target: f64) -> LossValueGrad {
    let (sin_d, cos_d) = (theta - theta_target).sin_cos();
    let (value, dl) = smooth_l1(sin_d);
    LossValueGrad {
        value,
        d_value: dl * cos_d,
        d_s: 0.0,
    }
}

/// Weighted sum of the classification, regression and variance losses.
pub fn assemble_loss(
    l_cls: f64,
    l_reg: f64,
    l_reg_theta: f64,
    l_var: f64,
    l_var_theta: f64,
    w: LossWeights,
) -> f64 {
    w.alpha_cls * l_cls
        + w.alpha_reg * (l_reg + w.alpha_angle * l_reg_theta)
        + w.alpha_var * (l_var + w.alpha_angle * l_var_theta)
}
