//! The three reference configurations (atomic units, barrier centred at the
//! origin, packet starting 50 a.u. to its left) and the term subsets that
//! approximate each of them.

use crate::propagator::{Packet, PoleSelection, TermSelector};
use crate::stationary::Barrier;

/// A barrier, a packet and an evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub barrier: Barrier,
    pub packet: Packet,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Transparent regime: `V0 = 188`, `d = 2.5`, `t = 5`.
    Fig1,
    /// Opaque regime: `V0 = 400`, `d = 3`, `t = 2.5`.
    Fig2,
    /// The first barrier during the collision, `t = 2.7`.
    Fig3,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig1, Preset::Fig2, Preset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn scenario(self) -> Scenario {
        let packet = Packet { xc: -50.0, pc: 20.0, delta_x: 100.0 };
        let (v0, d, t) = match self {
            Preset::Fig1 => (188.0, 2.5, 5.0),
            Preset::Fig2 => (400.0, 3.0, 2.5),
            Preset::Fig3 => (188.0, 2.5, 2.7),
        };
        Scenario { barrier: Barrier { v0, d, m: 1.0, hbar: 1.0 }, packet, t }
    }

    /// Momentum window `(p_lo, p_hi, n_points)` of the figure.
    pub fn window(self) -> (f64, f64, usize) {
        match self {
            Preset::Fig1 => (16.0, 24.0, 801),
            Preset::Fig2 | Preset::Fig3 => (-25.0, 25.0, 1000),
        }
    }

    /// Named approximate term subsets drawn against the exact curve.
    pub fn approximations(self) -> Vec<(&'static str, TermSelector)> {
        let none = TermSelector {
            incidence: false,
            reflection: false,
            transmission: false,
            barrier: false,
            poles: PoleSelection::None,
            corrections: None,
        };
        match self {
            Preset::Fig1 => vec![(
                "approx",
                TermSelector { reflection: true, transmission: true, poles: PoleSelection::Seeds(3), ..none },
            )],
            Preset::Fig2 => vec![("approx", TermSelector { incidence: true, reflection: true, ..none })],
            Preset::Fig3 => {
                let base = TermSelector {
                    incidence: true,
                    reflection: true,
                    transmission: true,
                    barrier: true,
                    poles: PoleSelection::Seeds(3),
                    corrections: None,
                };
                vec![("approx", base), ("approx_corrected", TermSelector { corrections: Some(0), ..base })]
            }
        }
    }
}
