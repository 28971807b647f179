//! Resonance poles: zeros of `Ω(p')` in the lower half of the complex
//! momentum plane.
//!
//! A pole is tracked as the barrier height is varied from a seed value where
//! the root sits at `p' = 0` to the physical height. In reduced variables
//! `k = p' d / hbar` and `v = m V0 d^2 / hbar^2` the root obeys
//!
//! ```text
//! dk/dv = (i v - k) / (v (i k - 2))
//! ```
//!
//! which follows from differentiating `Ω(k, v) = 0` implicitly. The seeds
//! are `v = -n^2 π^2 / 2`, and the path in the complex `v` plane is the arc
//! `v(s) = v_start + s (v_end - v_start) + i b s (1 - s)`. The free seed `n = 0`
//! starts at the singular point `v = 0` and is launched from its power series.
//! Endpoints are polished by Newton's method on `Ω`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::stationary::{Barrier, StationaryError};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const RTOL: f64 = 1e-10;
const ATOL: f64 = 1e-13;
const POLISH_MAX_ITER: usize = 50;
const DEDUP_RTOL: f64 = 1e-8;
/// Distance from `v = 0` at which the `n = 0` branch is launched.
const SERIES_START: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoleError {
    #[error("n_max must be at least 1")]
    NoSeeds,
    #[error("the continuation path passes through V0 = 0; use a nonzero bulge")]
    PathThroughZero,
    #[error("seed n = {n}: adaptive step collapsed at s = {s:.6}; increase the bulge")]
    StepCollapse { n: i64, s: f64 },
    #[error("seed n = {n}: continuation ended at p' = {p}, which is not in the lower half-plane")]
    UpperHalfPlane { n: i64, p: Complex64 },
    #[error("Newton polish from p' = {start} did not converge (last iterate {last}, |Omega| = {residual:.3e})")]
    NoConvergence { start: Complex64, last: Complex64, residual: f64 },
    #[error("polished root p' = {0} is not in the lower half-plane")]
    NotResonance(Complex64),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
}

/// A polished zero of `Ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonancePole {
    /// Seed label. Negative labels mark the mirror poles `-conj(p')`.
    pub seed: Option<i64>,
    pub p: Complex64,
    /// `1 / Ω'(p')`, the limit of `Ω / Ω'` used in the residues.
    pub f_factor: Complex64,
    /// `|Ω(p')|` after polishing.
    pub residual: f64,
}

impl ResonancePole {
    pub fn labelled(mut self, seed: i64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Parabolic arc in the complex `V0` plane, in energy units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationPath {
    pub v0_start: f64,
    pub v0_end: f64,
    /// Height of the arc at its midpoint is `bulge / 4`.
    pub bulge: f64,
    /// Number of equal steps used as the first step-size guess.
    pub steps: usize,
}

impl ContinuationPath {
    /// Path with the default bulge `max(|V0_start|, |V0_end|)`.
    pub fn new(v0_start: f64, v0_end: f64) -> Self {
        ContinuationPath { v0_start, v0_end, bulge: v0_start.abs().max(v0_end.abs()), steps: 64 }
    }

    pub fn with_bulge(mut self, bulge: f64) -> Self {
        self.bulge = bulge;
        self
    }

    fn crosses_zero(&self) -> bool {
        self.bulge == 0.0 && self.v0_start * self.v0_end < 0.0
    }
}

/// Seed barrier heights `V0 = -n^2 π^2 hbar^2 / (2 m d^2)` for `n = 1..=n_max`.
pub fn seed_values(barrier: &Barrier, n_max: usize) -> Vec<(i64, f64)> {
    let unit = PI * PI * barrier.hbar * barrier.hbar / (2.0 * barrier.m * barrier.d * barrier.d);
    (1..=n_max as i64).map(|n| (n, -((n * n) as f64) * unit)).collect()
}

/// Seed height for label `n`, including the free seed `n = 0`.
fn seed_height(barrier: &Barrier, n: i64) -> f64 {
    let unit = PI * PI * barrier.hbar * barrier.hbar / (2.0 * barrier.m * barrier.d * barrier.d);
    -((n * n) as f64) * unit
}

/// Integrates the root of `Ω` from `p' = 0` at `path.v0_start` to
/// `path.v0_end` and returns the unpolished endpoint.
///
/// `n` only labels errors. A start height of zero selects the free branch.
pub fn continue_pole(n: i64, barrier: &Barrier, path: &ContinuationPath) -> Result<Complex64, PoleError> {
    if path.v0_start == path.v0_end {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if path.crosses_zero() {
        return Err(PoleError::PathThroughZero);
    }
    let scale = barrier.m * barrier.d * barrier.d / (barrier.hbar * barrier.hbar);
    let vs = path.v0_start * scale;
    let ve = path.v0_end * scale;
    let b = path.bulge * scale;
    let v_of = |s: f64| Complex64::new(vs + s * (ve - vs), b * s * (1.0 - s));
    let dv_of = |s: f64| Complex64::new(ve - vs, b * (1.0 - 2.0 * s));
    let rhs = |s: f64, k: Complex64| {
        let v = v_of(s);
        (I * v - k) / (v * (I * k - 2.0)) * dv_of(s)
    };

    let (s0, k0) = if vs == 0.0 {
        let s0 = SERIES_START / dv_of(0.0).norm();
        let v = v_of(s0);
        let v2 = v * v;
        (s0, -I * (v + v2 / 3.0 + v2 * v / 5.0 + 46.0 * v2 * v2 / 315.0))
    } else {
        (0.0, Complex64::new(0.0, 0.0))
    };

    let k_end = dormand_prince(rhs, s0, k0, 1.0, 1.0 / path.steps.max(1) as f64)
        .map_err(|s| PoleError::StepCollapse { n, s })?;
    let p = k_end * (barrier.hbar / barrier.d);
    if p.im >= 0.0 || p.im.is_nan() {
        return Err(PoleError::UpperHalfPlane { n, p });
    }
    Ok(p)
}

/// Adaptive Dormand–Prince 5(4) integration of a complex scalar ODE.
/// On failure returns the parameter value where the step size collapsed.
fn dormand_prince<F>(f: F, s_start: f64, y_start: Complex64, s_end: f64, h_start: f64) -> Result<Complex64, f64>
where
    F: Fn(f64, Complex64) -> Complex64,
{
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // Fifth-order weights minus embedded fourth-order weights.
    const E: [f64; 7] =
        [71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0];

    let mut s = s_start;
    let mut y = y_start;
    let mut h = h_start.min(s_end - s_start);
    let mut k1 = f(s, y);
    while s < s_end {
        if h < 1e-14 {
            return Err(s);
        }
        let h_try = h.min(s_end - s);
        let mut k = [Complex64::default(); 7];
        k[0] = k1;
        for stage in 0..6 {
            let mut acc = y;
            for (j, a) in A[stage].iter().enumerate().take(stage + 1) {
                acc += k[j] * (h_try * a);
            }
            k[stage + 1] = f(s + C[stage] * h_try, acc);
        }
        // The last stage is evaluated at the fifth-order solution.
        let mut y_new = y;
        for (j, a) in A[5].iter().enumerate() {
            y_new += k[j] * (h_try * a);
        }
        let mut err = Complex64::default();
        for (j, e) in E.iter().enumerate() {
            err += k[j] * (h_try * e);
        }
        let tol = ATOL + RTOL * y.norm().max(y_new.norm());
        let ratio = err.norm() / tol;
        if !ratio.is_finite() {
            h = h_try / 10.0;
            continue;
        }
        if ratio <= 1.0 {
            s += h_try;
            y = y_new;
            k1 = k[6];
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
    }
    Ok(y)
}

/// Newton refinement of a zero of `Ω` starting from `p_guess`.
pub fn polish_pole(p_guess: Complex64, barrier: &Barrier) -> Result<ResonancePole, PoleError> {
    let mut p = p_guess;
    for _ in 0..=POLISH_MAX_ITER {
        let omega = barrier.omega(p)?;
        let residual = omega.norm();
        let converged = residual <= 1e-12 * (1.0 + p.norm());
        let slope = barrier.omega_derivative(p)?;
        if converged {
            return finish(p, slope, residual);
        }
        let step = omega / slope;
        if !step.is_finite() {
            break;
        }
        p -= step;
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + p.norm()) {
            // Stalled at rounding level: accept if the residual is still tight.
            let residual = barrier.omega(p)?.norm();
            if residual <= 1e-10 * (1.0 + p.norm()) {
                return finish(p, barrier.omega_derivative(p)?, residual);
            }
            break;
        }
    }
    let residual = barrier.omega(p).map(|o| o.norm()).unwrap_or(f64::NAN);
    Err(PoleError::NoConvergence { start: p_guess, last: p, residual })
}

fn finish(p: Complex64, slope: Complex64, residual: f64) -> Result<ResonancePole, PoleError> {
    if p.im >= 0.0 || p.im.is_nan() {
        return Err(PoleError::NotResonance(p));
    }
    Ok(ResonancePole { seed: None, p, f_factor: 1.0 / slope, residual })
}

fn continue_and_polish(barrier: &Barrier, n: i64) -> Result<Option<[ResonancePole; 2]>, PoleError> {
    let path = ContinuationPath::new(seed_height(barrier, n), barrier.v0);
    let guess = match continue_pole(n, barrier, &path) {
        Ok(p) => p,
        // Seeds shallower than a well end on bound states.
        Err(PoleError::UpperHalfPlane { .. }) if barrier.v0 < 0.0 => return Ok(None),
        Err(err) => return Err(err),
    };
    let pole = match polish_pole(guess, barrier) {
        Ok(pole) => pole.labelled(n),
        Err(PoleError::NotResonance(_)) if barrier.v0 < 0.0 => return Ok(None),
        Err(err) => return Err(err),
    };
    let mirror = polish_pole(-pole.p.conj(), barrier)?.labelled(-n);
    Ok(Some([pole, mirror]))
}

/// Continues, polishes and mirrors the poles from seeds `n = 0..=n_max`.
///
/// The result is free of duplicates, sorted by `|Re p'|` and contains only
/// lower-half-plane zeros. A free particle (`V0 = 0`) has no poles.
pub fn pole_table(barrier: &Barrier, n_max: usize) -> Result<Vec<ResonancePole>, PoleError> {
    if n_max == 0 {
        return Err(PoleError::NoSeeds);
    }
    if barrier.v0 == 0.0 {
        return Ok(Vec::new());
    }
    let found: Vec<_> =
        (0..=n_max as i64).into_par_iter().map(|n| continue_and_polish(barrier, n)).collect::<Result<_, _>>()?;
    Ok(assemble(found.into_iter().flatten().flatten()))
}

/// Pole table extended seed by seed until seeds `0..=n_min` are done and
/// every further pole has `|Re p'| > re_max`. At most `n_cap` seeds are tried.
pub fn pole_table_covering(
    barrier: &Barrier,
    re_max: f64,
    n_min: usize,
    n_cap: usize,
) -> Result<Vec<ResonancePole>, PoleError> {
    if barrier.v0 == 0.0 {
        return Ok(Vec::new());
    }
    const BATCH: i64 = 8;
    let mut poles = Vec::new();
    let mut start = 0i64;
    while start <= n_cap as i64 {
        let end = (start + BATCH - 1).min(n_cap as i64);
        let batch: Vec<_> =
            (start..=end).into_par_iter().map(|n| continue_and_polish(barrier, n)).collect::<Result<_, _>>()?;
        let batch: Vec<ResonancePole> = batch.into_iter().flatten().flatten().collect();
        let beyond = !batch.is_empty() && batch.iter().all(|pole| pole.p.re.abs() > re_max);
        poles.extend(batch);
        if beyond && end >= n_min as i64 {
            break;
        }
        start = end + 1;
    }
    Ok(assemble(poles))
}

fn assemble(poles: impl IntoIterator<Item = ResonancePole>) -> Vec<ResonancePole> {
    let mut unique: Vec<ResonancePole> = Vec::new();
    for pole in poles {
        match unique.iter_mut().find(|kept| (kept.p - pole.p).norm() <= DEDUP_RTOL * pole.p.norm().max(kept.p.norm())) {
            Some(kept) => {
                if pole.residual < kept.residual {
                    *kept = pole;
                }
            }
            None => unique.push(pole),
        }
    }
    unique.sort_by(|a, b| a.p.re.abs().total_cmp(&b.p.re.abs()).then(a.p.re.total_cmp(&b.p.re)));
    unique
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig1() -> Barrier {
        Barrier::atomic(188.0, 2.5).unwrap()
    }

    #[test]
    fn seeds_follow_n_squared() {
        let seeds = seed_values(&fig1(), 3);
        assert_eq!(seeds.len(), 3);
        assert_relative_eq!(seeds[0].1, -PI * PI / 12.5, max_relative = 1e-15);
        assert_relative_eq!(seeds[1].1, 4.0 * seeds[0].1, max_relative = 1e-15);
        assert_eq!(seeds[2].0, 3);
    }

    /// `lim p' Ω(p')` for `p' -> 0` along `1 - i`, by quadratic extrapolation.
    fn residue_at_origin(b: &Barrier) -> Complex64 {
        let dir = Complex64::new(1.0, -1.0);
        let eps = [1e-3, 2e-3, 4e-3];
        let vals: Vec<Complex64> = eps.iter().map(|&e| dir * e * b.omega(dir * e).unwrap()).collect();
        vals[0] * (eps[1] * eps[2]) / ((eps[0] - eps[1]) * (eps[0] - eps[2]))
            + vals[1] * (eps[0] * eps[2]) / ((eps[1] - eps[0]) * (eps[1] - eps[2]))
            + vals[2] * (eps[0] * eps[1]) / ((eps[2] - eps[0]) * (eps[2] - eps[1]))
    }

    #[test]
    fn seeds_remove_the_pole_of_omega_at_origin() {
        for (n, v0) in seed_values(&fig1(), 4) {
            let b = Barrier::atomic(v0, 2.5).unwrap();
            assert!(residue_at_origin(&b).norm() <= 1e-8, "n={n}");
            // The zero has merged with p' = 0, leaving Ω(0) = (-1)^n.
            let near = b.omega(Complex64::new(1e-6, -1e-6)).unwrap();
            assert!((near - (-1f64).powi(n as i32)).norm() < 1e-4);
            let off = Barrier::atomic(0.9 * v0, 2.5).unwrap();
            assert!(residue_at_origin(&off).norm() > 1e-2);
        }
    }

    #[test]
    fn zero_length_path_returns_origin() {
        let path = ContinuationPath::new(-3.0, -3.0);
        assert_eq!(continue_pole(1, &fig1(), &path).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn straight_path_through_zero_is_rejected() {
        let path = ContinuationPath::new(-3.0, 188.0).with_bulge(0.0);
        assert_eq!(continue_pole(1, &fig1(), &path), Err(PoleError::PathThroughZero));
    }

    #[test]
    fn continued_endpoint_is_nearly_a_root() {
        let b = fig1();
        for (n, v0) in seed_values(&b, 4) {
            let p = continue_pole(n, &b, &ContinuationPath::new(v0, b.v0)).unwrap();
            assert!(b.omega(p).unwrap().norm() < 1e-3, "n={n} p={p}");
        }
    }

    #[test]
    fn polish_keeps_an_exact_root() {
        let b = fig1();
        let pole = polish_pole(Complex64::new(19.6, -0.01), &b).unwrap();
        let again = polish_pole(pole.p, &b).unwrap();
        assert_eq!(again.p, pole.p);
    }

    #[test]
    fn known_fig1_poles() {
        let table = pole_table(&fig1(), 3).unwrap();
        let positive: Vec<_> = table.iter().filter(|p| p.p.re > 0.0).collect();
        let lowest = positive.iter().find(|p| p.seed == Some(0)).unwrap();
        assert_relative_eq!(lowest.p.re, 19.431_189_503_82, max_relative = 1e-10);
        assert_relative_eq!(lowest.p.im, -0.003_339_199_3, max_relative = 1e-6);
        let first = positive.iter().find(|p| p.seed == Some(1)).unwrap();
        assert_relative_eq!(first.p.re, 19.552_106, max_relative = 1e-7);
        assert_relative_eq!(first.p.im, -0.013_247, max_relative = 1e-4);
    }

    #[test]
    fn duplicates_are_merged() {
        let b = fig1();
        let a = polish_pole(Complex64::new(19.55, -0.013), &b).unwrap();
        let c = polish_pole(Complex64::new(19.56, -0.012), &b).unwrap();
        assert_eq!(assemble([a, c]).len(), 1);
    }

    #[test]
    fn zero_seeds_rejected() {
        assert_eq!(pole_table(&fig1(), 0), Err(PoleError::NoSeeds));
    }

    #[test]
    fn free_particle_has_no_poles() {
        assert!(pole_table(&Barrier::atomic(0.0, 2.5).unwrap(), 4).unwrap().is_empty());
    }
}
