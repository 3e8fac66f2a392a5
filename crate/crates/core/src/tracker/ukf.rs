//! Unscented Kalman filter over the CTRA pose state.
//!
//! Prediction pushes `2n + 1` scaled sigma points through [`ctra_step`].
//! Means are accumulated as weighted deviations from the central point,
//! which keeps the large negative central weight of small-`alpha` sigma
//! sets from cancelling away precision. The observation `(x, y, θ)` is a
//! coordinate selection of the state, so the update is the closed-form
//! Kalman correction (identical to the unscented one for a linear map),
//! written in Joseph form.

use nalgebra::{Cholesky, Matrix3, SMatrix, SymmetricEigen, Vector3};

use super::motion::{ctra_step, idx, Vector6};
use crate::error::{Error, Result};
use crate::types::normalize_angle;

pub type Matrix6 = SMatrix<f64, 6, 6>;
type Matrix3x6 = SMatrix<f64, 3, 6>;

const N: usize = 6;

/// Sigma-point scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

impl UkfParams {
    fn lambda(&self) -> f64 {
        self.alpha * self.alpha * (N as f64 + self.kappa) - N as f64
    }

    /// `(Wm_0, Wc_0, W_i)`
    fn weights(&self) -> (f64, f64, f64) {
        let lambda = self.lambda();
        let spread = N as f64 + lambda;
        let wm0 = lambda / spread;
        let wc0 = wm0 + 1.0 - self.alpha * self.alpha + self.beta;
        (wm0, wc0, 0.5 / spread)
    }
}

/// Filtered planar pose `(x, y, θ, v, a, ω)` with its covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseState {
    pub mean: Vector6,
    pub covariance: Matrix6,
}

impl PoseState {
    pub fn new(mean: Vector6, covariance: Matrix6) -> Self {
        let mut mean = mean;
        mean[idx::THETA] = normalize_angle(mean[idx::THETA]);
        Self { mean, covariance }
    }

    pub fn x(&self) -> f64 {
        self.mean[idx::X]
    }
    pub fn y(&self) -> f64 {
        self.mean[idx::Y]
    }
    pub fn theta(&self) -> f64 {
        self.mean[idx::THETA]
    }
    pub fn v(&self) -> f64 {
        self.mean[idx::V]
    }
    pub fn a(&self) -> f64 {
        self.mean[idx::A]
    }
    pub fn omega(&self) -> f64 {
        self.mean[idx::OMEGA]
    }

    /// Largest `|C - Cᵀ|` entry.
    pub fn asymmetry(&self) -> f64 {
        (self.covariance - self.covariance.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = 0.5 * (self.covariance + self.covariance.transpose());
        SymmetricEigen::new(sym).eigenvalues.min()
    }
}

/// Symmetrizes and, if needed, clamps negative eigenvalues to zero.
pub fn repair_covariance(c: &Matrix6) -> Matrix6 {
    let sym = 0.5 * (c + c.transpose());
    if Cholesky::new(sym).is_some() {
        return sym;
    }
    let eig = SymmetricEigen::new(sym);
    let scale = sym.diagonal().abs().max().max(1.0);
    if eig.eigenvalues.min() >= -1e-12 * scale {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let fixed = eig.eigenvectors * Matrix6::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    0.5 * (fixed + fixed.transpose())
}

/// Any `S` with `S Sᵀ = P` for symmetric PSD `P`.
fn matrix_sqrt(p: &Matrix6) -> Matrix6 {
    if let Some(ch) = Cholesky::new(*p) {
        return ch.l();
    }
    let eig = SymmetricEigen::new(*p);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Matrix6::from_diagonal(&roots)
}

/// Unscented prediction through CTRA, plus `q * dt` process noise.
pub fn ukf_predict(state: &PoseState, dt: f64, q: &Matrix6, params: &UkfParams) -> PoseState {
    let (_, wc0, wi) = params.weights();
    let spread = N as f64 + params.lambda();
    let root = matrix_sqrt(&(state.covariance * spread));

    let center = ctra_step(&state.mean, dt);
    // deviations of the propagated sigma points from the propagated center
    let mut devs = [Vector6::zeros(); 2 * N];
    for j in 0..N {
        let col = root.column(j).into_owned();
        devs[j] = ctra_step(&(state.mean + col), dt) - center;
        devs[j + N] = ctra_step(&(state.mean - col), dt) - center;
    }
    for d in devs.iter_mut() {
        d[idx::THETA] = normalize_angle(d[idx::THETA]);
    }

    let mut shift = Vector6::zeros();
    for d in &devs {
        shift += d * wi;
    }
    // circular mean of yaw relative to the center point
    let (mut sin_sum, mut cos_dev) = (0.0, 0.0);
    for d in &devs {
        let (s, c) = d[idx::THETA].sin_cos();
        sin_sum += wi * s;
        cos_dev += wi * (c - 1.0);
    }
    let yaw_shift = sin_sum.atan2(1.0 + cos_dev);
    shift[idx::THETA] = yaw_shift;

    let mut cov = wc0 * shift * shift.transpose();
    for d in &devs {
        let mut e = d - shift;
        e[idx::THETA] = normalize_angle(e[idx::THETA]);
        cov += wi * e * e.transpose();
    }
    cov += q * dt;

    let mut mean = center + shift;
    mean[idx::THETA] = normalize_angle(mean[idx::THETA]);
    PoseState {
        mean,
        covariance: repair_covariance(&cov),
    }
}

fn observation_matrix() -> Matrix3x6 {
    let mut h = Matrix3x6::zeros();
    h[(0, idx::X)] = 1.0;
    h[(1, idx::Y)] = 1.0;
    h[(2, idx::THETA)] = 1.0;
    h
}

/// Wrapped yaw innovation `measured - predicted`.
pub fn yaw_innovation(predicted: f64, measured: f64) -> f64 {
    normalize_angle(measured - predicted)
}

/// Correction with an observation of `(x, y, θ)` and diagonal noise `r`.
pub fn ukf_update(state: &PoseState, z: &Vector3<f64>, r: &Vector3<f64>) -> Result<PoseState> {
    if !r.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::NonPsdNoise);
    }
    let h = observation_matrix();
    let p = &state.covariance;
    let r_mat = Matrix3::from_diagonal(r);
    let s = h * p * h.transpose() + r_mat;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular innovation covariance".into()))?;
    let gain = p * h.transpose() * s_inv;

    let innovation = Vector3::new(
        z[0] - state.x(),
        z[1] - state.y(),
        yaw_innovation(state.theta(), z[2]),
    );
    let mut mean = state.mean + gain * innovation;
    mean[idx::THETA] = normalize_angle(mean[idx::THETA]);

    let i_kh = Matrix6::identity() - gain * h;
    let cov = i_kh * p * i_kh.transpose() + gain * r_mat * gain.transpose();
    Ok(PoseState {
        mean,
        covariance: repair_covariance(&cov),
    })
}
