//! Closed-form evolution of a Gaussian wave packet colliding with a square
//! barrier (or well), evaluated in the momentum representation.
//!
//! The wave function `psi(p, t)` is written as a sum of Faddeeva-function
//! terms: three "structural" terms (incidence, reflection, transmission), one
//! term per resonance pole of the stationary scattering amplitudes, and a
//! small Gaussian-integral correction of an entire remainder. Each piece is
//! exposed separately so that truncated approximations can be studied.
//!
//! Module map:
//!
//! * [`faddeeva`] - the complex function `w(z) = exp(-z^2) erfc(-iz)`.
//! * [`stationary`] - stationary scattering data `R, C, D, T` and `Omega`.
//! * [`poles`] - resonance poles by analytic continuation in the barrier height.
//! * [`propagator`] - the wave function itself, term by term.
//! * [`oracle`] - an independent Crank-Nicolson reference solution.
//! * [`presets`] - the parameter sets of the reference figures.
//! * [`quadrature`] - adaptive Gauss-Kronrod integration, used for checks.

pub mod faddeeva;
pub mod oracle;
pub mod poles;
pub mod presets;
pub mod propagator;
pub mod quadrature;
pub mod stationary;

pub use num_complex::Complex64;

pub use faddeeva::{w, w_reflect, w_scaled, FaddeevaError};
pub use oracle::{ConvergedReference, ErrorReport, GridSpec, MomentumGridResult, OracleError};
pub use poles::{pole_table, pole_table_covering, ContinuationPath, PoleError, ResonancePole};
pub use presets::{Preset, Scenario};
pub use propagator::{
    exact_pole_table, initial_psi, pole_table_for, Packet, PoleSelection, Propagator, PropagatorError, PsiBreakdown,
    SaddleData, TermSelector,
};
pub use stationary::{Barrier, ScatteringCoefficients, StationaryError};
