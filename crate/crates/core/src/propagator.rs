//! Closed-form momentum-space wave function of a Gaussian packet scattered
//! by the square barrier.
//!
//! After completing the square, the momentum integral is taken along the
//! steepest-descent line `p' = f u + z`. Each pole of the integrand then
//! contributes a Faddeeva function of its position `u` in that variable, and
//! what remains is an entire function `h(u)` integrated against `exp(-u^2)`.
//! The result is split into the incidence, reflection and transmission
//! (structural) terms, the resonance-pole sum, and the `h` correction, so any
//! subset can be summed.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use thiserror::Error;

use crate::faddeeva::{w_scaled, FaddeevaError};
use crate::poles::{pole_table_covering, PoleError, ResonancePole};
use crate::stationary::{sinc, Barrier, StationaryError};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const CIRCLE_NODES: usize = 64;
const MIN_RADIUS: f64 = 0.05;
const MAX_SEEDS: usize = 400;
const MAX_CORRECTIONS: usize = 15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagatorError {
    #[error("invalid packet parameter {field} = {value}")]
    InvalidPacket { field: &'static str, value: f64 },
    #[error("time must be finite and nonnegative, got {0}")]
    InvalidTime(f64),
    #[error("p = 0 is outside the domain of the structural terms")]
    ZeroMomentum,
    #[error("at most {MAX_CORRECTIONS} correction orders are supported, got {0}")]
    TooManyCorrections(usize),
    #[error("{term} term overflows at p = {p}{}", pole_suffix(.pole))]
    Overflow { term: &'static str, p: f64, pole: Option<Complex64> },
    #[error("correction circle radius {radius:.3e} is below {MIN_RADIUS}: pole p' = {pole} (seed {seed:?}) lies at |u| = {distance:.3e}; keep this pole")]
    CircleTooSmall { radius: f64, distance: f64, pole: Complex64, seed: Option<i64> },
    #[error("{term} term at p = {p}: {source}")]
    Stationary { term: &'static str, p: f64, source: StationaryError },
    #[error(transparent)]
    Poles(#[from] PoleError),
}

fn pole_suffix(pole: &Option<Complex64>) -> String {
    pole.map(|p| format!(" (pole p' = {p})")).unwrap_or_default()
}

/// Initial Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub xc: f64,
    pub pc: f64,
    /// Coordinate-space variance parameter `δ_x`.
    pub delta_x: f64,
}

impl Packet {
    pub fn new(xc: f64, pc: f64, delta_x: f64) -> Result<Self, PropagatorError> {
        let packet = Packet { xc, pc, delta_x };
        packet.validate()?;
        Ok(packet)
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !self.xc.is_finite() {
            return Err(PropagatorError::InvalidPacket { field: "xc", value: self.xc });
        }
        if !self.pc.is_finite() {
            return Err(PropagatorError::InvalidPacket { field: "pc", value: self.pc });
        }
        if !(self.delta_x.is_finite() && self.delta_x > 0.0) {
            return Err(PropagatorError::InvalidPacket { field: "deltax", value: self.delta_x });
        }
        Ok(())
    }

    /// Momentum standard deviation `hbar / (2 sqrt(δ_x))`.
    pub fn momentum_width(&self, hbar: f64) -> f64 {
        hbar / (2.0 * self.delta_x.sqrt())
    }

    /// True when the packet starts closer than five position widths to the
    /// left barrier edge, where the closed form loses accuracy.
    pub fn overlaps(&self, barrier: &Barrier) -> bool {
        (self.xc + 0.5 * barrier.d).abs() < 5.0 * self.delta_x.sqrt()
    }
}

/// `<p|ψ(0)>`.
pub fn initial_psi(p: f64, packet: &Packet, hbar: f64) -> Complex64 {
    let norm = (2.0 * packet.delta_x / (PI * hbar * hbar)).powf(0.25);
    let dp = p - packet.pc;
    let exponent = Complex64::new(-packet.delta_x * dp * dp / (hbar * hbar), -p * packet.xc / hbar);
    norm * exponent.exp()
}

/// Quantities fixed by the packet, the barrier width and the time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleData {
    /// Scale of the steepest-descent variable, `p' = f u + z`.
    pub f: Complex64,
    /// Saddle point.
    pub z: Complex64,
    pub eta: Complex64,
    pub tau: f64,
    /// Logarithm of `i f τ hbar (2π hbar)^{-1/2} exp(-δ_x p_c^2/hbar^2 + η^2)`.
    pub log_prefactor: Complex64,
}

impl SaddleData {
    pub fn new(t: f64, packet: &Packet, barrier: &Barrier) -> Self {
        let (m, hbar, delta) = (barrier.m, barrier.hbar, packet.delta_x);
        let pc = packet.pc;
        let s = packet.xc + 0.5 * barrier.d;
        let a = Complex64::new(delta / (hbar * hbar), t / (2.0 * m * hbar));
        let f = 1.0 / a.sqrt();

        let denom = 4.0 * m * m * delta * delta + t * t * hbar * hbar;
        let z = Complex64::new(
            m * (4.0 * m * pc * delta * delta - s * hbar * hbar * t),
            -2.0 * m * hbar * (m * delta * s + pc * delta * t),
        ) / denom;

        let eta = Complex64::new(2.0 * pc * delta / (hbar * hbar), -s / hbar) / (4.0 * a).sqrt();
        // -δ p_c^2/hbar^2 + η^2 over a common denominator, free of cancellation.
        let h3 = hbar.powi(3);
        let exponent =
            Complex64::new(-s * s / (hbar * hbar), -2.0 * t * delta * pc * pc / (m * h3) - 4.0 * pc * delta * s / h3)
                / (4.0 * a);

        let tau = (2.0 * PI * hbar).powf(-0.5) * (2.0 * delta / (PI * hbar * hbar)).powf(0.25);
        let scale = I * f * tau * hbar / (2.0 * PI * hbar).sqrt();
        SaddleData { f, z, eta, tau, log_prefactor: scale.ln() + exponent }
    }

    pub fn prefactor(&self) -> Complex64 {
        self.log_prefactor.exp()
    }

    /// Position of a momentum-plane point in the steepest-descent variable.
    pub fn u_of(&self, p: Complex64) -> Complex64 {
        (p - self.z) / self.f
    }

    pub fn p_of(&self, u: Complex64) -> Complex64 {
        self.f * u + self.z
    }
}

/// Which resonance poles are extracted explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoleSelection {
    /// No pole terms.
    None,
    /// Every pole in the supplied table.
    All,
    /// Poles continued from seeds `1..=k` on the positive-momentum side.
    Seeds(usize),
    /// Poles with `|Re p'| <= limit`.
    MaxAbsRe(f64),
}

impl PoleSelection {
    fn keeps(&self, pole: &ResonancePole) -> bool {
        match *self {
            PoleSelection::None => false,
            PoleSelection::All => true,
            PoleSelection::Seeds(k) => matches!(pole.seed, Some(n) if n >= 1 && n as usize <= k),
            PoleSelection::MaxAbsRe(limit) => pole.p.re.abs() <= limit,
        }
    }
}

/// Subset of terms summed into ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSelector {
    pub incidence: bool,
    pub reflection: bool,
    pub transmission: bool,
    /// The inner-region (`C` and `D`) contributions.
    pub barrier: bool,
    pub poles: PoleSelection,
    /// Number of even Taylor orders of `h` beyond the leading one.
    /// `None` drops the correction altogether.
    pub corrections: Option<usize>,
}

impl TermSelector {
    /// All terms, every pole of the table, four correction orders.
    pub fn exact() -> Self {
        TermSelector {
            incidence: true,
            reflection: true,
            transmission: true,
            barrier: true,
            poles: PoleSelection::All,
            corrections: Some(4),
        }
    }

    /// All terms, poles within six momentum widths of the packet, two
    /// correction orders.
    pub fn default_for(packet: &Packet, hbar: f64) -> Self {
        TermSelector {
            poles: PoleSelection::MaxAbsRe(packet.pc.abs() + 6.0 * packet.momentum_width(hbar)),
            corrections: Some(2),
            ..Self::exact()
        }
    }
}

/// ψ(p, t) split into its pieces. `total` is their sum in field order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PsiBreakdown {
    pub incidence: Complex64,
    pub reflection: Complex64,
    pub transmission: Complex64,
    pub resonance: Complex64,
    pub correction: Complex64,
    pub total: Complex64,
}

impl PsiBreakdown {
    fn assemble(
        incidence: Complex64,
        reflection: Complex64,
        transmission: Complex64,
        resonance: Complex64,
        correction: Complex64,
    ) -> Self {
        PsiBreakdown {
            incidence,
            reflection,
            transmission,
            resonance,
            correction,
            total: incidence + reflection + transmission + resonance + correction,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PoleEntry {
    pole: ResonancePole,
    u: Complex64,
    kept: bool,
}

/// Evaluator of ψ(p, t) at a fixed time.
#[derive(Debug, Clone)]
pub struct Propagator {
    barrier: Barrier,
    packet: Packet,
    t: f64,
    saddle: SaddleData,
    selector: TermSelector,
    poles: Vec<PoleEntry>,
}

/// Pole table wide enough for exact-mode evaluation of `packet`.
pub fn exact_pole_table(barrier: &Barrier, packet: &Packet) -> Result<Vec<ResonancePole>, PoleError> {
    pole_table_for(barrier, packet, PoleSelection::All)
}

/// Pole table that covers `packet` and contains every pole `selection`
/// can ask for.
pub fn pole_table_for(
    barrier: &Barrier,
    packet: &Packet,
    selection: PoleSelection,
) -> Result<Vec<ResonancePole>, PoleError> {
    let mut reach = packet.pc.abs() + 20.0 * packet.momentum_width(barrier.hbar) + 2.0;
    let mut n_min = 0;
    match selection {
        PoleSelection::MaxAbsRe(limit) => reach = reach.max(limit + 2.0),
        PoleSelection::Seeds(k) => n_min = k,
        PoleSelection::None | PoleSelection::All => {}
    }
    pole_table_covering(barrier, reach, n_min, MAX_SEEDS.max(n_min))
}

impl Propagator {
    pub fn new(
        barrier: Barrier,
        packet: Packet,
        t: f64,
        poles: Vec<ResonancePole>,
        selector: TermSelector,
    ) -> Result<Self, PropagatorError> {
        barrier.validate().map_err(|source| PropagatorError::Stationary { term: "barrier", p: f64::NAN, source })?;
        packet.validate()?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(PropagatorError::InvalidTime(t));
        }
        if let Some(k) = selector.corrections {
            if k > MAX_CORRECTIONS {
                return Err(PropagatorError::TooManyCorrections(k));
            }
        }
        let saddle = SaddleData::new(t, &packet, &barrier);
        let poles = poles
            .into_iter()
            .map(|pole| PoleEntry { u: saddle.u_of(pole.p), kept: selector.poles.keeps(&pole), pole })
            .collect();
        Ok(Propagator { barrier, packet, t, saddle, selector, poles })
    }

    /// Exact mode with a pole table computed for this packet.
    pub fn exact(barrier: Barrier, packet: Packet, t: f64) -> Result<Self, PropagatorError> {
        let poles = exact_pole_table(&barrier, &packet)?;
        Self::new(barrier, packet, t, poles, TermSelector::exact())
    }

    pub fn saddle(&self) -> &SaddleData {
        &self.saddle
    }

    pub fn selector(&self) -> &TermSelector {
        &self.selector
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn barrier(&self) -> &Barrier {
        &self.barrier
    }

    pub fn packet(&self) -> &Packet {
        &self.packet
    }

    /// Poles extracted as explicit terms.
    pub fn kept_poles(&self) -> impl Iterator<Item = &ResonancePole> {
        self.poles.iter().filter(|e| e.kept).map(|e| &e.pole)
    }

    /// Human-readable warnings about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.packet.overlaps(&self.barrier) {
            out.push(format!(
                "initial packet overlaps the barrier: |xc + d/2| = {:.3} < 5 sqrt(deltax) = {:.3}",
                (self.packet.xc + 0.5 * self.barrier.d).abs(),
                5.0 * self.packet.delta_x.sqrt()
            ));
        }
        out
    }

    fn stationary<T>(term: &'static str, p: f64, r: Result<T, StationaryError>) -> Result<T, PropagatorError> {
        r.map_err(|source| PropagatorError::Stationary { term, p, source })
    }

    fn scaled_w(
        &self,
        term: &'static str,
        p: f64,
        pole: Option<Complex64>,
        arg: Complex64,
    ) -> Result<Complex64, PropagatorError> {
        w_scaled(arg, self.saddle.log_prefactor).map_err(|err| match err {
            FaddeevaError::Overflow(_) | FaddeevaError::NonFinite(_) => PropagatorError::Overflow { term, p, pole },
        })
    }

    fn half_phase(&self, p: f64) -> Complex64 {
        (I * (0.5 * p * self.barrier.d / self.barrier.hbar)).exp()
    }

    /// Residues of the incidence, reflection and transmission poles in `u`.
    fn structural_residues(&self, p: f64) -> Result<[Complex64; 3], PropagatorError> {
        let b = &self.barrier;
        let f = self.saddle.f;
        let half = self.half_phase(p);
        let pm = Complex64::new(-p, 0.0);
        let pp = Complex64::new(p, 0.0);
        let r_inc = -half / f;
        let r_refl = if self.selector.reflection {
            let numer = Self::stationary("reflection", p, b.reflection_numerator(pm))?;
            let omega = Self::stationary("reflection", p, b.omega(pm))?;
            numer / omega * (-I * p * b.d / b.hbar).exp() * half / f
        } else {
            Complex64::default()
        };
        let r_trans = if self.selector.transmission {
            let omega = Self::stationary("transmission", p, b.omega(pp))?;
            1.0 / (omega * half * f)
        } else {
            Complex64::default()
        };
        Ok([r_inc, r_refl, r_trans])
    }

    /// The structural w-terms (incidence, reflection, transmission).
    pub fn structural_terms(&self, p: f64) -> Result<[Complex64; 3], PropagatorError> {
        if p == 0.0 {
            return Err(PropagatorError::ZeroMomentum);
        }
        let [r_inc, r_refl, r_trans] = self.structural_residues(p)?;
        let u_it = self.saddle.u_of(Complex64::new(p, 0.0));
        let u_r = self.saddle.u_of(Complex64::new(-p, 0.0));
        let i_pi = I * PI;
        let inc = if self.selector.incidence {
            i_pi * r_inc * self.scaled_w("incidence", p, None, u_it)?
        } else {
            Complex64::default()
        };
        let refl = if self.selector.reflection {
            -i_pi * r_refl * self.scaled_w("reflection", p, None, -u_r)?
        } else {
            Complex64::default()
        };
        let trans = if self.selector.transmission {
            -i_pi * r_trans * self.scaled_w("transmission", p, None, -u_it)?
        } else {
            Complex64::default()
        };
        Ok([inc, refl, trans])
    }

    /// `(g_C + g_D) Ω` at complex `p'`, even in the branch of `p''`.
    fn barrier_numerator(&self, p: f64, pp: Complex64) -> Complex64 {
        let a = 0.5 * self.barrier.d / self.barrier.hbar;
        let q = self.barrier.p_double_prime(pp);
        let pc = Complex64::new(p, 0.0);
        let s = |y: Complex64| a * sinc(a * y);
        let parts = |q: Complex64| {
            let phase = (-I * a * q).exp();
            (phase * s(pc - q), s(pc + q) / phase)
        };
        let (aa, bb) = parts(q);
        let diff_over_q = if (a * q).norm() < 0.05 {
            // Removable singularity at q = 0: mean value over a circle around q.
            const NODES: usize = 32;
            let rho = 0.2 / a;
            let mut acc = Complex64::default();
            for k in 0..NODES {
                let zeta = q + Complex64::from_polar(rho, 2.0 * PI * k as f64 / NODES as f64);
                let (x, y) = parts(zeta);
                acc += (x - y) / zeta;
            }
            acc / NODES as f64
        } else {
            (aa - bb) / q
        };
        -I * ((aa + bb) + pp * diff_over_q)
    }

    /// Combined residue of one resonance pole over the included components.
    fn pole_residue(&self, p: f64, pole: &ResonancePole) -> Result<Complex64, PropagatorError> {
        let b = &self.barrier;
        let f = self.saddle.f;
        let pj = pole.p;
        let k = b.d / b.hbar;
        let fj = pole.f_factor;
        let mut total = Complex64::default();
        if self.selector.reflection {
            let numer = Self::stationary("resonance", p, b.reflection_numerator(pj))?;
            total += numer * (I * pj * k).exp() * self.half_phase(p) * fj / ((p + pj) * f);
        }
        if self.selector.barrier {
            total += self.barrier_numerator(p, pj) * fj / f;
        }
        if self.selector.transmission {
            total -= fj / (self.half_phase(p) * (p - pj) * f);
        }
        Ok(total)
    }

    /// The w-term that `pole` contributes at `p` when it is extracted,
    /// whether or not this propagator keeps it.
    pub fn pole_term(&self, p: f64, pole: &ResonancePole) -> Result<Complex64, PropagatorError> {
        let residue = self.pole_residue(p, pole)?;
        let u = self.saddle.u_of(pole.p);
        Ok(-I * PI * residue * self.scaled_w("resonance", p, Some(pole.p), -u)?)
    }

    /// Every pole in the table, kept or not.
    pub fn all_poles(&self) -> impl Iterator<Item = &ResonancePole> {
        self.poles.iter().map(|e| &e.pole)
    }

    /// Sum of the kept resonance-pole w-terms.
    pub fn resonance_terms(&self, p: f64) -> Result<Complex64, PropagatorError> {
        let mut total = Complex64::default();
        for entry in self.poles.iter().filter(|e| e.kept) {
            total += self.pole_term(p, &entry.pole)?;
        }
        Ok(total)
    }

    /// Sum of the included `g` functions minus every extracted pole part.
    fn h_value(
        &self,
        p: f64,
        u: Complex64,
        structural: &[Complex64; 3],
        kept: &[(Complex64, Complex64)],
    ) -> Result<Complex64, PropagatorError> {
        let b = &self.barrier;
        let pp = self.saddle.p_of(u);
        let omega = Self::stationary("correction", p, b.omega(pp))?;
        let half = self.half_phase(p);
        let u_it = self.saddle.u_of(Complex64::new(p, 0.0));
        let u_r = self.saddle.u_of(Complex64::new(-p, 0.0));
        let mut h = Complex64::default();
        if self.selector.reflection {
            let numer = Self::stationary("correction", p, b.reflection_numerator(pp))?;
            h += numer / omega * (I * pp * b.d / b.hbar).exp() * half / (p + pp) - structural[1] / (u - u_r);
        }
        if self.selector.barrier {
            h += self.barrier_numerator(p, pp) / omega;
        }
        if self.selector.transmission {
            h += -1.0 / (omega * half * (p - pp)) - structural[2] / (u - u_it);
        }
        for &(u_j, residue) in kept {
            h -= residue / (u - u_j);
        }
        Ok(h)
    }

    /// Radius of the Taylor circle for `h` at momentum `p`.
    fn circle_radius(&self, p: f64) -> Result<f64, PropagatorError> {
        let mut r_max: f64 = 1.0;
        let mut nearest: Option<(f64, &PoleEntry)> = None;
        let singular_parts = self.selector.reflection || self.selector.transmission || self.selector.barrier;
        if singular_parts {
            for entry in self.poles.iter().filter(|e| !e.kept) {
                let dist = entry.u.norm();
                if nearest.map_or(true, |(d, _)| dist < d) {
                    nearest = Some((dist, entry));
                }
                r_max = r_max.min(0.5 * dist);
            }
        }
        if r_max < MIN_RADIUS {
            let (distance, entry) = nearest.expect("radius only shrinks for an unkept pole");
            return Err(PropagatorError::CircleTooSmall {
                radius: r_max,
                distance,
                pole: entry.pole.p,
                seed: entry.pole.seed,
            });
        }
        // Keep the nodes away from the extracted poles to limit cancellation.
        let mut extracted: Vec<f64> = self.poles.iter().filter(|e| e.kept).map(|e| e.u.norm()).collect();
        if self.selector.reflection {
            extracted.push(self.saddle.u_of(Complex64::new(-p, 0.0)).norm());
        }
        if self.selector.transmission {
            extracted.push(self.saddle.u_of(Complex64::new(p, 0.0)).norm());
        }
        let gap = |r: f64| extracted.iter().map(|&d| (d - r).abs()).fold(f64::INFINITY, f64::min);
        let best = [1.0, 0.9, 0.8, 0.7, 0.6, 0.5]
            .iter()
            .map(|&c| c * r_max)
            .filter(|&r| r >= MIN_RADIUS)
            .max_by(|&a, &b| gap(a).total_cmp(&gap(b)))
            .unwrap_or(r_max);
        Ok(best)
    }

    /// The Gaussian integral of `h`, truncated after `corrections` even orders.
    pub fn correction_term(&self, p: f64) -> Result<Complex64, PropagatorError> {
        let Some(orders) = self.selector.corrections else {
            return Ok(Complex64::default());
        };
        if !(self.selector.reflection || self.selector.transmission || self.selector.barrier) {
            return Ok(Complex64::default());
        }
        if p == 0.0 {
            return Err(PropagatorError::ZeroMomentum);
        }
        let structural = self.structural_residues(p)?;
        let kept: Vec<(Complex64, Complex64)> = self
            .poles
            .iter()
            .filter(|e| e.kept)
            .map(|e| Ok((e.u, self.pole_residue(p, &e.pole)?)))
            .collect::<Result<_, PropagatorError>>()?;
        let radius = self.circle_radius(p)?;

        let mut samples = [Complex64::default(); CIRCLE_NODES];
        for (k, sample) in samples.iter_mut().enumerate() {
            let u = Complex64::from_polar(radius, 2.0 * PI * k as f64 / CIRCLE_NODES as f64);
            *sample = self.h_value(p, u, &structural, &kept)?;
        }

        // Taylor coefficient c_n = h^(n)(0)/n! from the trapezoid rule on the circle,
        // weighted by the Gaussian moments (2n-1)!!/2^n.
        let mut sum = Complex64::default();
        let mut moment = 1.0;
        for n in 0..=orders {
            if n > 0 {
                moment *= (2 * n - 1) as f64 / 2.0;
            }
            let order = 2 * n;
            let mut coeff = Complex64::default();
            for (k, sample) in samples.iter().enumerate() {
                let angle = -2.0 * PI * (order * k % CIRCLE_NODES) as f64 / CIRCLE_NODES as f64;
                coeff += sample * Complex64::from_polar(1.0, angle);
            }
            coeff /= CIRCLE_NODES as f64 * radius.powi(order as i32);
            sum += coeff * moment;
        }
        let scale = self.saddle.log_prefactor;
        if scale.re > 709.0 {
            return Err(PropagatorError::Overflow { term: "correction", p, pole: None });
        }
        Ok(scale.exp() * PI.sqrt() * sum)
    }

    /// ψ(p, t) with its per-term breakdown.
    pub fn psi(&self, p: f64) -> Result<PsiBreakdown, PropagatorError> {
        let [inc, refl, trans] = self.structural_terms(p)?;
        let resonance = self.resonance_terms(p)?;
        let correction = self.correction_term(p)?;
        Ok(PsiBreakdown::assemble(inc, refl, trans, resonance, correction))
    }

    /// ψ on a grid of momenta, evaluated in parallel.
    pub fn psi_grid(&self, ps: &[f64]) -> Result<Vec<PsiBreakdown>, PropagatorError> {
        ps.par_iter().map(|&p| self.psi(p)).collect()
    }
}
