//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Below [`SERIES_CUTOFF`] the ascending power series is summed directly.
//! Above it the Hankel asymptotic expansion
//! `I_nu(k) ~ e^k / sqrt(2 pi k) * sum_n t_n` is used, truncated at its
//! smallest term. Only the logarithm is ever formed on that branch, so
//! `log_bessel_i0` stays finite far past the overflow point of `e^k`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Crossover between the power series and the asymptotic expansion.
pub const SERIES_CUTOFF: f64 = 15.0;

fn check_domain(kappa: f64) -> Result<()> {
    if kappa.is_nan() || kappa < 0.0 {
        return Err(Error::Domain(format!(
            "Bessel argument must be non-negative, got {kappa}"
        )));
    }
    Ok(())
}

/// `sum_n (k^2/4)^n / (n!)^2`
fn i0_series(kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 1.0;
    loop {
        term *= q / (n * n);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        n += 1.0;
    }
}

/// `(k/2) sum_n (k^2/4)^n / (n! (n+1)!)`
fn i1_series(kappa: f64) -> f64 {
    let q = 0.25 * kappa * kappa;
    let mut term = 0.5 * kappa;
    let mut sum = term;
    let mut n = 1.0;
    while term > sum * 1e-17 {
        term *= q / (n * (n + 1.0));
        sum += term;
        n += 1.0;
    }
    sum
}

/// Sum of the asymptotic series for `I_nu`, `nu in {0, 1}`, without the
/// `e^k / sqrt(2 pi k)` prefactor.
fn asymptotic_sum(order: u32, kappa: f64) -> f64 {
    let four_nu2 = 4.0 * f64::from(order * order);
    let mut term = 1.0_f64;
    let mut sum = 1.0;
    for n in 1..200 {
        let n = f64::from(n);
        let odd = 2.0 * n - 1.0;
        let next = term * (odd * odd - four_nu2) / (8.0 * n * kappa);
        // divergent tail: stop at the smallest term
        if next.abs() >= term.abs() && n > 1.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// Modified Bessel function `I_0(kappa)`.
///
/// Intended for `kappa <= 50`; larger arguments still work up to the
/// overflow of `exp` (around 713) but [`log_bessel_i0`] should be used.
pub fn bessel_i0(kappa: f64) -> Result<f64> {
    check_domain(kappa)?;
    if kappa <= SERIES_CUTOFF {
        Ok(i0_series(kappa))
    } else {
        Ok(log_i0_unchecked(kappa).exp())
    }
}

/// `log I_0(kappa)`, finite for every finite non-negative argument.
pub fn log_bessel_i0(kappa: f64) -> Result<f64> {
    check_domain(kappa)?;
    Ok(log_i0_unchecked(kappa))
}

pub(crate) fn log_i0_unchecked(kappa: f64) -> f64 {
    if kappa <= SERIES_CUTOFF {
        i0_series(kappa).ln()
    } else {
        kappa - 0.5 * (2.0 * PI * kappa).ln() + asymptotic_sum(0, kappa).ln()
    }
}

/// `A(kappa) = I_1(kappa) / I_0(kappa)`, the derivative of `log I_0`.
pub fn bessel_ratio_i1_i0(kappa: f64) -> Result<f64> {
    check_domain(kappa)?;
    Ok(ratio_unchecked(kappa))
}

pub(crate) fn ratio_unchecked(kappa: f64) -> f64 {
    if kappa <= SERIES_CUTOFF {
        i1_series(kappa) / i0_series(kappa)
    } else if kappa.is_infinite() {
        1.0
    } else {
        asymptotic_sum(1, kappa) / asymptotic_sum(0, kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert_eq!(bessel_i0(0.0).unwrap(), 1.0);
        assert!((bessel_i0(1.0).unwrap() - 1.266_065_877_752_008_4).abs() < 1e-14);
        assert!((bessel_i0(2.0).unwrap() - 2.279_585_302_336_067).abs() < 1e-13);
        assert_eq!(log_bessel_i0(0.0).unwrap(), 0.0);
        assert!((log_bessel_i0(1.0).unwrap() - 0.235_914_358_5).abs() < 1e-7);
        assert_eq!(bessel_ratio_i1_i0(0.0).unwrap(), 0.0);
        assert!((bessel_ratio_i1_i0(1.0).unwrap() - 0.446_389_9).abs() < 1e-7);
        let a50 = bessel_ratio_i1_i0(50.0).unwrap();
        assert!(a50 > 0.98 && a50 < 1.0);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        assert!(matches!(bessel_i0(-1.0), Err(Error::Domain(_))));
        assert!(matches!(log_bessel_i0(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(bessel_ratio_i1_i0(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn branches_agree_at_cutoff() {
        // the series is valid everywhere, so compare it against the
        // asymptotic branch just above the seam
        for k in [15.0_f64, 15.5, 20.0, 30.0] {
            let series = i0_series(k).ln();
            let asym = k - 0.5 * (2.0 * PI * k).ln() + asymptotic_sum(0, k).ln();
            assert!(((series - asym) / series).abs() < 1e-12, "k={k}");
            let rs = i1_series(k) / i0_series(k);
            let ra = asymptotic_sum(1, k) / asymptotic_sum(0, k);
            assert!((rs - ra).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn log_finite_at_large_argument() {
        for k in [100.0, 500.0, 700.0, 1e5] {
            assert!(log_bessel_i0(k).unwrap().is_finite());
        }
    }
}
