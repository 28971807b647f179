//! Reference solutions on a position grid.
//!
//! The packet is evolved with the Crank–Nicolson scheme (second order in
//! `Δx` and `Δt`, exactly norm preserving) and transformed to momentum space
//! with an FFT. A converged reference combines three runs, each refining the
//! previous one by a factor of two in both `Δx` and `Δt`, through Richardson
//! extrapolation. An independent second reference superposes the stationary
//! scattering states directly.
//!
//! The grid is placed so that the barrier edges `±d/2` fall on nodes; these
//! nodes take the potential `V0 / 2`. The Hamiltonian is shifted by the
//! packet's mean kinetic energy before time stepping, which removes the fast
//! global phase rotation from the time discretisation error; the phase is
//! restored exactly at the end.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;
use thiserror::Error;

use crate::propagator::{initial_psi, Packet};
use crate::stationary::{Barrier, StationaryError};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("boundary contamination at t = {t:.4}: |psi| at the box edge is {ratio:.2e} of the peak; enlarge the box")]
    BoundaryContamination { t: f64, ratio: f64 },
    #[error("boundary contamination: {0}; enlarge the box")]
    BoxTooSmall(String),
    #[error("comparison window contains no points")]
    EmptyWindow,
    #[error("analytic and reference samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error("cache file: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Position grid and time stepping. Nodes are `x_min + k dx` for
/// `k = 0..n_x`, with `dx = (x_max - x_min) / n_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub dt: f64,
    pub n_t: usize,
}

impl GridSpec {
    /// Grid of about `[-half_width, half_width]` whose spacing puts the
    /// barrier edges on nodes.
    pub fn aligned(barrier: &Barrier, half_width: f64, n_x: usize, t_final: f64, n_t: usize) -> Self {
        let half_d = 0.5 * barrier.d;
        let cells = ((half_d * n_x as f64 / (2.0 * half_width)).round() as usize).max(1);
        let dx = half_d / cells as f64;
        let x_min = -((n_x / 2) as f64) * dx;
        GridSpec { x_min, x_max: x_min + n_x as f64 * dx, n_x, dt: t_final / n_t.max(1) as f64, n_t }
    }

    /// Default grid for the reference configurations.
    pub fn standard(barrier: &Barrier, t_final: f64) -> Self {
        Self::aligned(barrier, 160.0, 1 << 18, t_final, 250)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_t as f64
    }

    /// The same box with `Δx` and `Δt` halved.
    pub fn refined(&self) -> Self {
        GridSpec { n_x: 2 * self.n_x, dt: 0.5 * self.dt, n_t: 2 * self.n_t, ..*self }
    }

    /// Checks size, spectral resolution and the margin between the box and
    /// the classical extent of the packet over the run.
    pub fn validate(&self, packet: &Packet, barrier: &Barrier) -> Result<(), OracleError> {
        let bad = |msg: String| Err(OracleError::InvalidGrid(msg));
        if !self.n_x.is_power_of_two() || self.n_x < 2048 {
            return bad(format!("n_x = {} must be a power of two >= 2048", self.n_x));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) || self.n_t == 0 {
            return bad(format!("time step dt = {} with n_t = {} is not usable", self.dt, self.n_t));
        }
        if self.x_max.partial_cmp(&self.x_min) != Some(std::cmp::Ordering::Greater) {
            return bad(format!("empty box [{}, {}]", self.x_min, self.x_max));
        }
        let p_nyquist = barrier.hbar * PI / self.dx();
        if p_nyquist <= 3.0 * packet.pc.abs() {
            return bad(format!(
                "grid momentum limit {p_nyquist:.3} does not exceed 3 |pc| = {:.3}",
                3.0 * packet.pc.abs()
            ));
        }
        let (lo, hi) = classical_extent(packet, barrier, self.t_final());
        let width = packet.delta_x.sqrt()
            * (1.0 + (barrier.hbar * self.t_final() / (2.0 * barrier.m * packet.delta_x)).powi(2)).sqrt();
        let margin = 10.0 * width;
        if lo - margin < self.x_min || hi + margin > self.x_max {
            return Err(OracleError::BoxTooSmall(format!(
                "box [{:.2}, {:.2}] leaves less than {margin:.2} around the packet's range [{lo:.2}, {hi:.2}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }
}

/// Leftmost and rightmost classical centre positions of the incoming,
/// reflected and transmitted parts over `[0, t]`.
fn classical_extent(packet: &Packet, barrier: &Barrier, t: f64) -> (f64, f64) {
    let speed = (packet.pc.abs() + 5.0 * packet.momentum_width(barrier.hbar)) / barrier.m;
    let half_d = 0.5 * barrier.d;
    let (xc, dir) = if packet.pc >= 0.0 { (packet.xc, 1.0) } else { (-packet.xc, -1.0) };
    // Work in the frame where the packet moves right.
    let mut lo = xc;
    let hi = xc + speed * t;
    if xc < -half_d {
        let t_hit = (-half_d - xc) / speed;
        if t > t_hit {
            lo = lo.min(-half_d - speed * (t - t_hit));
        }
    }
    if dir > 0.0 {
        (lo, hi)
    } else {
        (-hi, -lo)
    }
}

/// Wave function on the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionState {
    pub grid: GridSpec,
    pub t: f64,
    pub psi: Vec<Complex64>,
}

impl PositionState {
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }
}

/// ψ sampled on a momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGridResult {
    pub p_values: Vec<f64>,
    pub psi_values: Vec<Complex64>,
    pub norm: f64,
    pub t: f64,
}

impl MomentumGridResult {
    /// Samples with `p_lo <= p <= p_hi`.
    pub fn window(&self, p_lo: f64, p_hi: f64) -> (Vec<f64>, Vec<Complex64>) {
        self.p_values
            .iter()
            .zip(&self.psi_values)
            .filter(|(p, _)| (p_lo..=p_hi).contains(*p))
            .map(|(p, v)| (*p, *v))
            .unzip()
    }

    pub fn momentum_norm(&self) -> f64 {
        let dp = self.p_values.get(1).zip(self.p_values.first()).map(|(b, a)| b - a).unwrap_or(0.0);
        self.psi_values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dp
    }
}

/// Closed-form position-space initial state matching [`initial_psi`].
pub fn initial_position_psi(x: f64, packet: &Packet, hbar: f64) -> Complex64 {
    let dx = x - packet.xc;
    let norm = (2.0 * PI * packet.delta_x).powf(-0.25);
    norm * Complex64::new(-dx * dx / (4.0 * packet.delta_x), packet.pc * dx / hbar).exp()
}

fn potential(grid: &GridSpec, barrier: &Barrier, k: usize) -> f64 {
    let x = grid.x(k).abs();
    let half_d = 0.5 * barrier.d;
    let tol = 1e-9 * grid.dx();
    if (x - half_d).abs() <= tol {
        0.5 * barrier.v0
    } else if x < half_d {
        barrier.v0
    } else {
        0.0
    }
}

/// Crank–Nicolson propagation of the initial packet up to `t_final`.
pub fn propagate(
    packet: &Packet,
    barrier: &Barrier,
    t_final: f64,
    grid: &GridSpec,
) -> Result<PositionState, OracleError> {
    grid.validate(packet, barrier)?;
    if (grid.t_final() - t_final).abs() > 1e-12 * t_final.abs().max(1.0) {
        return Err(OracleError::InvalidGrid(format!(
            "n_t * dt = {} does not reach t_final = {t_final}",
            grid.t_final()
        )));
    }
    propagate_inner(packet, barrier, grid)
}

fn propagate_inner(packet: &Packet, barrier: &Barrier, grid: &GridSpec) -> Result<PositionState, OracleError> {
    let t_final = grid.t_final();
    let n = grid.n_x;
    let (hbar, m) = (barrier.hbar, barrier.m);
    let dx = grid.dx();
    let e_ref = packet.pc * packet.pc / (2.0 * m);
    let kin = hbar * hbar / (2.0 * m * dx * dx);
    let alpha = I * (grid.dt / (2.0 * hbar));

    let diag: Vec<f64> = (0..n).map(|k| 2.0 * kin + potential(grid, barrier, k) - e_ref).collect();
    let off = -kin;

    // Thomas factorisation of (1 + alpha H): constant off-diagonal alpha * off.
    let lower = alpha * off;
    let mut inv_pivot = vec![Complex64::default(); n];
    let mut factor = vec![Complex64::default(); n];
    let mut pivot = 1.0 + alpha * diag[0];
    inv_pivot[0] = 1.0 / pivot;
    for k in 1..n {
        factor[k] = lower * inv_pivot[k - 1];
        pivot = 1.0 + alpha * diag[k] - factor[k] * lower;
        inv_pivot[k] = 1.0 / pivot;
    }

    let mut psi: Vec<Complex64> = (0..n).map(|k| initial_position_psi(grid.x(k), packet, hbar)).collect();
    let mut rhs = vec![Complex64::default(); n];
    for step in 0..grid.n_t {
        let mut peak = 0.0f64;
        for k in 0..n {
            let left = if k > 0 { psi[k - 1] } else { Complex64::default() };
            let right = if k + 1 < n { psi[k + 1] } else { Complex64::default() };
            rhs[k] = psi[k] - alpha * (diag[k] * psi[k] + off * (left + right));
            peak = peak.max(psi[k].norm_sqr());
        }
        let edge = psi[0].norm_sqr().max(psi[n - 1].norm_sqr());
        if edge > 1e-16 * peak {
            return Err(OracleError::BoundaryContamination { t: step as f64 * grid.dt, ratio: (edge / peak).sqrt() });
        }
        // Forward elimination then back substitution.
        for k in 1..n {
            let prev = rhs[k - 1];
            rhs[k] -= factor[k] * prev;
        }
        psi[n - 1] = rhs[n - 1] * inv_pivot[n - 1];
        for k in (0..n - 1).rev() {
            psi[k] = (rhs[k] - lower * psi[k + 1]) * inv_pivot[k];
        }
    }
    let peak = psi.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let edge = psi[0].norm_sqr().max(psi[n - 1].norm_sqr());
    if edge > 1e-16 * peak {
        return Err(OracleError::BoundaryContamination { t: t_final, ratio: (edge / peak).sqrt() });
    }
    let phase = (-I * (e_ref * t_final / hbar)).exp();
    psi.iter_mut().for_each(|v| *v *= phase);
    Ok(PositionState { grid: *grid, t: t_final, psi })
}

/// Continuum Fourier transform `ψ(p) = (2π hbar)^{-1/2} ∫ e^{-ipx/hbar} ψ(x) dx`
/// on the conjugate grid, sorted by increasing `p`.
pub fn to_momentum(state: &PositionState, hbar: f64) -> MomentumGridResult {
    let n = state.psi.len();
    let dx = state.grid.dx();
    let mut buffer = state.psi.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let dp = 2.0 * PI * hbar / (n as f64 * dx);
    let scale = dx / (2.0 * PI * hbar).sqrt();
    let half = n / 2;
    let mut p_values = Vec::with_capacity(n);
    let mut psi_values = Vec::with_capacity(n);
    for j in 0..n {
        // Reorder so that frequencies run from -n/2 to n/2 - 1.
        let k = (j + half) % n;
        let freq = if k >= half { k as f64 - n as f64 } else { k as f64 };
        let p = freq * dp;
        p_values.push(p);
        psi_values.push(buffer[k] * scale * (-I * (p * state.grid.x_min / hbar)).exp());
    }
    MomentumGridResult { p_values, psi_values, norm: state.norm(), t: state.t }
}

/// Distances between an analytic curve and a reference on common points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// `||a - r||_2 / ||r||_2`.
    pub relative_l2: f64,
    /// `max |a - r| / max |r|`.
    pub linf_over_peak: f64,
    /// Momentum where `|a - r|` is largest.
    pub worst_p: f64,
    pub points: usize,
}

pub fn compare(p_values: &[f64], analytic: &[Complex64], reference: &[Complex64]) -> Result<ErrorReport, OracleError> {
    if analytic.len() != reference.len() || p_values.len() != reference.len() {
        return Err(OracleError::LengthMismatch(analytic.len(), reference.len()));
    }
    if reference.is_empty() {
        return Err(OracleError::EmptyWindow);
    }
    let mut diff2 = 0.0;
    let mut ref2 = 0.0;
    let mut worst = (0.0, p_values[0]);
    let mut peak = 0.0f64;
    for ((&p, a), r) in p_values.iter().zip(analytic).zip(reference) {
        let d = (a - r).norm();
        diff2 += d * d;
        ref2 += r.norm_sqr();
        peak = peak.max(r.norm());
        if d > worst.0 {
            worst = (d, p);
        }
    }
    let ratio = |num: f64, den: f64| if num == 0.0 { 0.0 } else { num / den };
    Ok(ErrorReport {
        relative_l2: ratio(diff2.sqrt(), ref2.sqrt()),
        linf_over_peak: ratio(worst.0, peak),
        worst_p: worst.1,
        points: reference.len(),
    })
}

/// Richardson-extrapolated reference from three grid levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedReference {
    pub p_values: Vec<f64>,
    pub psi_values: Vec<Complex64>,
    /// Raw results of the three levels restricted to the window.
    pub levels: Vec<Vec<Complex64>>,
    /// Norms of the three position-space states.
    pub norms: Vec<f64>,
    /// `||v0 - v1|| / ||v1 - v2||`, about 4 for a second-order scheme.
    pub refinement_ratio: f64,
    pub t: f64,
}

impl ConvergedReference {
    /// The extrapolated values as a [`MomentumGridResult`].
    pub fn as_result(&self) -> MomentumGridResult {
        MomentumGridResult {
            p_values: self.p_values.clone(),
            psi_values: self.psi_values.clone(),
            norm: self.norms[self.norms.len() - 1],
            t: self.t,
        }
    }
}

/// Runs `base`, `base.refined()` and `base.refined().refined()` in parallel
/// and extrapolates the momentum-space results on `[-p_max, p_max]`.
pub fn converged(
    packet: &Packet,
    barrier: &Barrier,
    t_final: f64,
    base: &GridSpec,
    p_max: f64,
) -> Result<ConvergedReference, OracleError> {
    let grids = [*base, base.refined(), base.refined().refined()];
    let runs: Vec<MomentumGridResult> = grids
        .par_iter()
        .map(|g| propagate(packet, barrier, t_final, g).map(|s| to_momentum(&s, barrier.hbar)))
        .collect::<Result<_, _>>()?;
    let (p_values, _) = runs[0].window(-p_max, p_max);
    if p_values.is_empty() {
        return Err(OracleError::EmptyWindow);
    }
    let levels: Vec<Vec<Complex64>> = runs
        .iter()
        .map(|run| {
            // All levels share the box length, hence the momentum spacing.
            let offset = run.p_values.partition_point(|&p| p < p_values[0] - 1e-9);
            run.psi_values[offset..offset + p_values.len()].to_vec()
        })
        .collect();
    let dist = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let refinement_ratio = dist(&levels[0], &levels[1]) / dist(&levels[1], &levels[2]);
    let psi_values = (0..p_values.len())
        .map(|k| {
            let r1 = (4.0 * levels[1][k] - levels[0][k]) / 3.0;
            let r2 = (4.0 * levels[2][k] - levels[1][k]) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
        .collect();
    Ok(ConvergedReference {
        p_values,
        psi_values,
        levels,
        norms: runs.iter().map(|r| r.norm).collect(),
        refinement_ratio,
        t: t_final,
    })
}

/// Position-space superposition of stationary states,
/// `ψ(x, t) = ∫ φ_{p'}(x) e^{-i p'^2 t / 2 m hbar} <p'|ψ(0)> dp'`,
/// over `p_c ± half_span` with `n_p` trapezoid nodes, sampled on `grid`.
pub fn eigen_superposition(
    packet: &Packet,
    barrier: &Barrier,
    t: f64,
    grid: &GridSpec,
    half_span: f64,
    n_p: usize,
) -> Result<PositionState, OracleError> {
    let hbar = barrier.hbar;
    let dp = 2.0 * half_span / (n_p - 1) as f64;
    let half_d = 0.5 * barrier.d;
    let norm = (2.0 * PI * hbar).powf(-0.5);
    let modes: Vec<_> = (0..n_p)
        .map(|k| {
            let p = packet.pc - half_span + k as f64 * dp;
            let weight = if k == 0 || k + 1 == n_p { 0.5 } else { 1.0 };
            let amp = initial_psi(p, packet, hbar)
                * (-I * (p * p * t / (2.0 * barrier.m * hbar))).exp()
                * (weight * dp * norm);
            barrier.coefficients(Complex64::new(p, 0.0)).map(|c| (p, amp, c))
        })
        .collect::<Result<_, _>>()?;
    let psi = (0..grid.n_x)
        .into_par_iter()
        .map(|j| {
            let x = grid.x(j);
            modes
                .iter()
                .map(|(p, amp, c)| {
                    let k = p / hbar;
                    let local = if x < -half_d {
                        (I * k * x).exp() + c.r * (-I * k * x).exp()
                    } else if x <= half_d {
                        let kk = c.p_dp / hbar;
                        c.c * (I * kk * x).exp() + c.d * (-I * kk * x).exp()
                    } else {
                        c.t * (I * k * x).exp()
                    };
                    amp * local
                })
                .sum()
        })
        .collect();
    Ok(PositionState { grid: *grid, t, psi })
}

/// Hex SHA-256 of the parameters that determine a converged reference.
pub fn cache_key(packet: &Packet, barrier: &Barrier, t: f64, grid: &GridSpec, p_max: f64) -> String {
    let text = cache_header(packet, barrier, t, grid, p_max);
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn cache_header(packet: &Packet, barrier: &Barrier, t: f64, grid: &GridSpec, p_max: f64) -> String {
    format!(
        "wavepacket-oracle v1\nV0={:e}\nd={:e}\nm={:e}\nhbar={:e}\nxc={:e}\npc={:e}\ndeltax={:e}\nt={:e}\nx_min={:e}\nx_max={:e}\nn_x={}\ndt={:e}\nn_t={}\np_max={:e}\n",
        barrier.v0, barrier.d, barrier.m, barrier.hbar, packet.xc, packet.pc, packet.delta_x, t,
        grid.x_min, grid.x_max, grid.n_x, grid.dt, grid.n_t, p_max
    )
}

/// Writes a text header with every parameter followed by the reference as
/// little-endian `f64` values: all momenta, then interleaved re/im of ψ.
pub fn save_cache(
    path: &Path,
    reference: &ConvergedReference,
    packet: &Packet,
    barrier: &Barrier,
    grid: &GridSpec,
    p_max: f64,
) -> Result<(), OracleError> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    out.write_all(cache_header(packet, barrier, reference.t, grid, p_max).as_bytes())?;
    writeln!(out, "refinement_ratio={:e}", reference.refinement_ratio)?;
    writeln!(out, "norm={:e}", reference.norms[reference.norms.len() - 1])?;
    writeln!(out, "points={}", reference.p_values.len())?;
    writeln!(out, "end")?;
    for p in &reference.p_values {
        out.write_all(&p.to_le_bytes())?;
    }
    for v in &reference.psi_values {
        out.write_all(&v.re.to_le_bytes())?;
        out.write_all(&v.im.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// A reference read back from a cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedReference {
    pub header: String,
    pub refinement_ratio: f64,
    pub result: MomentumGridResult,
}

/// Reads a cache file written by [`save_cache`] and checks that its header
/// matches the requested parameters.
pub fn load_cache(
    path: &Path,
    packet: &Packet,
    barrier: &Barrier,
    t: f64,
    grid: &GridSpec,
    p_max: f64,
) -> Result<CachedReference, OracleError> {
    let bad = |msg: &str| OracleError::Cache(format!("{}: {msg}", path.display()));
    let mut reader = io::BufReader::new(fs::File::open(path)?);
    let expected = cache_header(packet, barrier, t, grid, p_max);
    let mut header = String::new();
    let (mut ratio, mut norm, mut points) = (None, None, None);
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(bad("truncated header"));
        }
        if line == "end\n" {
            break;
        }
        if let Some(v) = line.trim_end().strip_prefix("refinement_ratio=") {
            ratio = v.parse::<f64>().ok();
        } else if let Some(v) = line.trim_end().strip_prefix("norm=") {
            norm = v.parse::<f64>().ok();
        } else if let Some(v) = line.trim_end().strip_prefix("points=") {
            points = v.parse::<usize>().ok();
        } else {
            header.push_str(&line);
        }
    }
    if header != expected {
        return Err(bad("parameters differ from the request"));
    }
    let (ratio, norm, points) = match (ratio, norm, points) {
        (Some(r), Some(n), Some(p)) => (r, n, p),
        _ => return Err(bad("missing summary fields")),
    };
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != points * 3 * 8 {
        return Err(bad("payload length does not match the point count"));
    }
    let floats: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let p_values = floats[..points].to_vec();
    let psi_values = floats[points..].chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok(CachedReference {
        header,
        refinement_ratio: ratio,
        result: MomentumGridResult { p_values, psi_values, norm, t },
    })
}
