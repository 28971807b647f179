//! The Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`.
//!
//! In the closed upper half-plane `w` is evaluated directly with Gautschi's
//! scheme: a power series of `erf` near the origin, the Laplace continued
//! fraction far from it, and in between a Taylor expansion whose derivatives
//! come out of the same continued-fraction recurrence. The region boundaries
//! and term counts follow the classic choices of Poppe and Wijers, which
//! deliver close to full double precision.
//!
//! The lower half-plane is reached only through `w(z) = 2 exp(-z^2) - w(-z)`.
//! There `exp(-z^2)` can exceed the range of `f64`, in which case an
//! [`FaddeevaError::Overflow`] is returned instead of an infinite value.

use num_complex::Complex64;
use thiserror::Error;

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Largest real part of an exponent that still leaves room for the factor 2.
const MAX_EXPONENT: f64 = 709.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FaddeevaError {
    #[error("Faddeeva argument is not finite: {0}")]
    NonFinite(Complex64),
    #[error("exp(-z^2) overflows the f64 range at z = {0}")]
    Overflow(Complex64),
}

/// Evaluates `w(z)` for any finite `z`.
///
/// Relative accuracy is about `1e-14` for `Im z >= 0`. Below the real axis the
/// reflection relation is used and the result inherits the conditioning of
/// `2 exp(-z^2) - w(-z)`.
pub fn w(z: Complex64) -> Result<Complex64, FaddeevaError> {
    check_finite(z)?;
    if z.im >= 0.0 {
        Ok(w_upper(z))
    } else {
        let exponent = -z * z;
        if exponent.re > MAX_EXPONENT {
            return Err(FaddeevaError::Overflow(z));
        }
        Ok(2.0 * exponent.exp() - w_upper(-z))
    }
}

/// Evaluates `2 exp(-z^2) - w(z)`, i.e. `w(-z)`.
///
/// The value is computed as `w(-z)`, which keeps the half-plane that needs
/// the reflection the same as for [`w`].
pub fn w_reflect(z: Complex64) -> Result<Complex64, FaddeevaError> {
    check_finite(z)?;
    w(-z).map_err(|err| match err {
        FaddeevaError::Overflow(_) => FaddeevaError::Overflow(z),
        other => other,
    })
}

/// Evaluates `exp(log_scale) * w(z)` without forming the two factors apart.
///
/// For `Im z < 0` the reflected piece `2 exp(log_scale - z^2)` is combined in
/// the exponent, so large growth of `exp(-z^2)` that is compensated by a small
/// scale factor does not overflow.
pub fn w_scaled(z: Complex64, log_scale: Complex64) -> Result<Complex64, FaddeevaError> {
    check_finite(z)?;
    check_finite(log_scale)?;
    if z.im >= 0.0 {
        if log_scale.re > MAX_EXPONENT {
            return Err(FaddeevaError::Overflow(z));
        }
        Ok(log_scale.exp() * w_upper(z))
    } else {
        let exponent = log_scale - z * z;
        if exponent.re > MAX_EXPONENT || log_scale.re > MAX_EXPONENT {
            return Err(FaddeevaError::Overflow(z));
        }
        Ok(2.0 * exponent.exp() - log_scale.exp() * w_upper(-z))
    }
}

fn check_finite(z: Complex64) -> Result<(), FaddeevaError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(FaddeevaError::NonFinite(z))
    }
}

/// `w(z)` for `Im z >= 0`.
fn w_upper(z: Complex64) -> Complex64 {
    let x = z.re.abs();
    let y = z.im;
    debug_assert!(y >= 0.0);

    // Elliptic radius that separates the three regions.
    let rho2 = (x / 6.3).powi(2) + (y / 4.4).powi(2);

    let (re, mut im) = if rho2 < 0.085_264 { small_argument(x, y, rho2) } else { continued_fraction(x, y, rho2) };
    if z.re < 0.0 {
        im = -im;
    }
    Complex64::new(re, im)
}

/// Power series of `erf(-i z)` multiplied by `exp(-z^2)`, for `x, y >= 0`.
fn small_argument(x: f64, y: f64, rho2: f64) -> (f64, f64) {
    let zz_re = x * x - y * y;
    let zz_im = 2.0 * x * y;

    let rho = (1.0 - 0.85 * y / 4.4) * rho2.sqrt();
    let terms = (6.0 + 72.0 * rho).round() as usize + 2;

    // Horner evaluation of sum_k (z^2)^k / (k! (2k+1)).
    let mut odd = 2 * terms + 1;
    let mut sum_re = 1.0 / odd as f64;
    let mut sum_im = 0.0;
    for k in (1..=terms).rev() {
        odd -= 2;
        let kf = k as f64;
        let next_re = (sum_re * zz_re - sum_im * zz_im) / kf;
        sum_im = (sum_re * zz_im + sum_im * zz_re) / kf;
        sum_re = next_re + 1.0 / odd as f64;
    }

    // 1 - erf(-iz) with erf(-iz) = -(2/sqrt(pi)) i z * sum.
    let a_re = 1.0 - TWO_OVER_SQRT_PI * (sum_re * y + sum_im * x);
    let a_im = TWO_OVER_SQRT_PI * (sum_re * x - sum_im * y);

    let decay = (-zz_re).exp();
    let e_re = decay * zz_im.cos();
    let e_im = -decay * zz_im.sin();

    (a_re * e_re - a_im * e_im, a_re * e_im + a_im * e_re)
}

/// Laplace continued fraction, optionally combined with a Taylor expansion
/// around `z + i h` whose coefficients come from the same recurrence.
fn continued_fraction(x: f64, y: f64, rho2: f64) -> (f64, f64) {
    let (h, taylor_terms, depth) = if rho2 > 1.0 {
        let rho = rho2.sqrt();
        (0.0, 0usize, (3.0 + 1442.0 / (26.0 * rho + 77.0)) as usize)
    } else {
        let q = (1.0 - y / 4.4) * (1.0 - rho2).sqrt();
        (1.88 * q, (7.0 + 34.0 * q).round() as usize, (16.0 + 26.0 * q).round() as usize)
    };
    let two_h = 2.0 * h;
    let mut lambda = if h > 0.0 { two_h.powi(taylor_terms as i32) } else { 0.0 };

    let (mut r_re, mut r_im) = (0.0, 0.0);
    let (mut s_re, mut s_im) = (0.0, 0.0);
    for n in (0..=depth).rev() {
        let np1 = (n + 1) as f64;
        let t_re = y + h + np1 * r_re;
        let t_im = x - np1 * r_im;
        let c = 0.5 / (t_re * t_re + t_im * t_im);
        r_re = c * t_re;
        r_im = c * t_im;
        if h > 0.0 && n <= taylor_terms {
            let t = lambda + s_re;
            s_re = r_re * t - r_im * s_im;
            s_im = r_im * t + r_re * s_im;
            lambda /= two_h;
        }
    }

    let (mut re, im) = if h == 0.0 {
        (TWO_OVER_SQRT_PI * r_re, TWO_OVER_SQRT_PI * r_im)
    } else {
        (TWO_OVER_SQRT_PI * s_re, TWO_OVER_SQRT_PI * s_im)
    };
    if y == 0.0 {
        re = (-x * x).exp();
    }
    (re, im)
}
