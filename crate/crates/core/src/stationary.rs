//! Stationary scattering states of a square barrier of height `V0` on
//! `[-d/2, d/2]`.
//!
//! Every formula here is written in terms of `Q = p'^2 - 2 m V0 = p''^2`
//! and the even functions `cos x` and `sin x / x` of `x = p'' d / hbar`.
//! Written that way `Ω`, `R` and `T` do not depend on which square root is
//! taken for `p''`, and they stay finite through `p'' = 0`.

use num_complex::Complex64;
use thiserror::Error;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("invalid barrier parameter {field} = {value} (must be finite and positive)")]
    InvalidParameter { field: &'static str, value: f64 },
    #[error("momentum p' = 0 is outside the domain")]
    ZeroMomentum,
    #[error("Omega vanishes at p' = {0}: this is a resonance pole")]
    Resonance(Complex64),
    #[error("p'' = 0 at p' = {0}: C and D are singular on this branch point")]
    BranchPoint(Complex64),
}

/// Physical parameters of the square barrier (a well when `v0 < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub v0: f64,
    pub d: f64,
    pub m: f64,
    pub hbar: f64,
}

/// Stationary coefficients for incident amplitude `I = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringCoefficients {
    pub r: Complex64,
    pub c: Complex64,
    pub d: Complex64,
    pub t: Complex64,
    pub omega: Complex64,
    /// `p''` on the principal branch.
    pub p_dp: Complex64,
}

impl Barrier {
    pub fn new(v0: f64, d: f64, m: f64, hbar: f64) -> Result<Self, StationaryError> {
        let barrier = Barrier { v0, d, m, hbar };
        barrier.validate()?;
        Ok(barrier)
    }

    /// Barrier in atomic units (`m = hbar = 1`).
    pub fn atomic(v0: f64, d: f64) -> Result<Self, StationaryError> {
        Self::new(v0, d, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), StationaryError> {
        if !self.v0.is_finite() {
            return Err(StationaryError::InvalidParameter { field: "V0", value: self.v0 });
        }
        for (field, value) in [("d", self.d), ("m", self.m), ("hbar", self.hbar)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(StationaryError::InvalidParameter { field, value });
            }
        }
        Ok(())
    }

    /// `p'^2 - 2 m V0`.
    pub fn q(&self, p: Complex64) -> Complex64 {
        p * p - 2.0 * self.m * self.v0
    }

    /// Principal square root of `p'^2 - 2 m V0`: nonnegative real part, and
    /// nonnegative imaginary part when the real part is zero.
    pub fn p_double_prime(&self, p: Complex64) -> Complex64 {
        let mut root = self.q(p).sqrt();
        if root.re == 0.0 && root.im < 0.0 {
            root.im = -root.im;
        }
        if root.im == 0.0 {
            root.im = 0.0;
        }
        root
    }

    fn phase_arg(&self, p: Complex64) -> Complex64 {
        self.p_double_prime(p) * (self.d / self.hbar)
    }

    /// `Ω(p')`, the common denominator of the stationary coefficients.
    pub fn omega(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        nonzero(p)?;
        let q = self.q(p);
        let x = self.phase_arg(p);
        let half_k = 0.5 * self.d / self.hbar;
        Ok(x.cos() - I * half_k * (q / p + p) * sinc(x))
    }

    /// `dΩ/dp'`, differentiated analytically.
    pub fn omega_derivative(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        nonzero(p)?;
        let q = self.q(p);
        let x = self.phase_arg(p);
        let k2 = (self.d / self.hbar).powi(2);
        let s = sinc(x);
        let d_cos = -0.5 * k2 * s;
        let d_sinc = 0.5 * k2 * sinc_slope(x);
        let half_k = 0.5 * self.d / self.hbar;
        Ok(2.0 * p * d_cos - I * half_k * ((3.0 - q / (p * p)) * s + 2.0 * (q + p * p) * d_sinc))
    }

    /// `R(p') Ω(p')`, an entire function of `p'` away from `p' = 0`.
    pub fn reflection_numerator(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        nonzero(p)?;
        let q = self.q(p);
        let x = self.phase_arg(p);
        let half_k = 0.5 * self.d / self.hbar;
        Ok(I * half_k * (q / p - p) * sinc(x) * (-I * p * (self.d / self.hbar)).exp())
    }

    /// `T(p') Ω(p') = exp(-i p' d / hbar)`.
    pub fn transmission_numerator(&self, p: Complex64) -> Complex64 {
        (-I * p * (self.d / self.hbar)).exp()
    }

    /// `R(p')`.
    pub fn reflection(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        let omega = self.nonresonant_omega(p)?;
        Ok(self.reflection_numerator(p)? / omega)
    }

    /// `T(p')`.
    pub fn transmission(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        let omega = self.nonresonant_omega(p)?;
        Ok(self.transmission_numerator(p) / omega)
    }

    fn nonresonant_omega(&self, p: Complex64) -> Result<Complex64, StationaryError> {
        let omega = self.omega(p)?;
        if omega == Complex64::new(0.0, 0.0) {
            return Err(StationaryError::Resonance(p));
        }
        Ok(omega)
    }

    /// All stationary coefficients at `p'`.
    ///
    /// `R`, `T` and `Ω` are branch invariant. `C` and `D` are reported for the
    /// principal `p''`; flipping the branch swaps their roles, so only the
    /// combination `C e^{i p'' x} + D e^{-i p'' x}` carries meaning.
    pub fn coefficients(&self, p: Complex64) -> Result<ScatteringCoefficients, StationaryError> {
        let omega = self.nonresonant_omega(p)?;
        let p_dp = self.p_double_prime(p);
        if p_dp == Complex64::new(0.0, 0.0) {
            return Err(StationaryError::BranchPoint(p));
        }
        let k = self.d / self.hbar;
        let ratio = p / p_dp;
        let c = (1.0 + ratio) * (-I * (p + p_dp) * (0.5 * k)).exp() / (2.0 * omega);
        let d = (1.0 - ratio) * (-I * (p - p_dp) * (0.5 * k)).exp() / (2.0 * omega);
        Ok(ScatteringCoefficients {
            r: self.reflection_numerator(p)? / omega,
            c,
            d,
            t: self.transmission_numerator(p) / omega,
            omega,
            p_dp,
        })
    }
}

fn nonzero(p: Complex64) -> Result<(), StationaryError> {
    if p == Complex64::new(0.0, 0.0) {
        Err(StationaryError::ZeroMomentum)
    } else {
        Ok(())
    }
}

/// `sin x / x`, an even entire function.
pub(crate) fn sinc(x: Complex64) -> Complex64 {
    if x.norm() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(x cos x - sin x) / x^3`, so that `d(sinc x)/dx = x * sinc_slope(x)`.
pub(crate) fn sinc_slope(x: Complex64) -> Complex64 {
    if x.norm() < 0.1 {
        // sum_{n>=1} (-1)^n 2n x^{2n-2} / (2n+1)!
        let x2 = x * x;
        let mut term = Complex64::new(-1.0 / 3.0, 0.0);
        let mut total = term;
        for n in 2..8u32 {
            let nf = f64::from(n);
            term = -term * x2 * (nf / (nf - 1.0)) / ((2.0 * nf) * (2.0 * nf + 1.0));
            total += term;
        }
        total
    } else {
        (x * x.cos() - x.sin()) / (x * x * x)
    }
}
