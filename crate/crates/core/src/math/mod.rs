//! Special functions and uncertainty-regression losses.

mod bessel;
pub mod check;
mod loss;

pub use bessel::{bessel_i0, bessel_ratio_i1_i0, log_bessel_i0, SERIES_CUTOFF};
pub use loss::{
    assemble_loss, elu, elu_derivative, gaussian_nll, sine_error_loss, smooth_l1, von_mises_nll,
    GaussianNllConfig, LossValueGrad, LossWeights, VonMisesNllConfig, LOG_VAR_CLAMP,
};
