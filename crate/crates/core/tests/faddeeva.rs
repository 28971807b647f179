use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wavepacket_core::quadrature::integrate;
use wavepacket_core::{w, w_reflect, FaddeevaError};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(i/pi) * integral of exp(-t^2) / (z - t)` along `t = s - i`, valid for
/// `Im z > -1`. Moving the line below the real axis keeps the integrand
/// smooth for points close to the axis.
fn w_by_quadrature(z: Complex64) -> Complex64 {
    let shift = c(0.0, -1.0);
    let integrand = |s: f64| {
        let t = s + shift;
        (-t * t).exp() / (z - t)
    };
    let integral = integrate(integrand, -12.0, 12.0, 1e-15, 1e-14, 4000);
    assert!(integral.converged, "quadrature did not converge at {z}");
    c(0.0, 1.0 / std::f64::consts::PI) * integral.value
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn agrees_with_quadrature_on_random_points() {
    let mut rng = StdRng::seed_from_u64(20_240_611);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let z = c(rng.random_range(-6.0..6.0), rng.random_range(1e-3..6.0));
        let err = rel(w(z).unwrap(), w_by_quadrature(z));
        worst = worst.max(err);
    }
    assert!(worst <= 1e-10, "worst relative error {worst:e}");
}

#[test]
fn reference_values() {
    // Values from a 30-digit evaluation of exp(-z^2) erfc(-iz).
    let cases = [
        (c(1.0, 1.0), c(0.304_744_205_256_912_6, 0.208_218_938_202_831_6)),
        (c(0.0, 1.0), c(0.427_583_576_155_807, 0.0)),
        (c(2.0, 0.5), c(0.103_358_823_741_366_7, 0.284_785_884_750_093_7)),
    ];
    for (z, expected) in cases {
        assert!(rel(w(z).unwrap(), expected) < 1e-13, "w({z})");
        assert!(rel(w_reflect(-z).unwrap(), expected) < 1e-13, "w_reflect({})", -z);
    }
}

#[test]
fn reflection_identity_on_a_log_polar_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let r = 1e-3 * (50.0f64 / 1e-3).powf(i as f64 / 39.0);
        for k in 0..24 {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / 24.0;
            let z = Complex64::from_polar(r, theta);
            let lhs = match (w(z), w(-z)) {
                (Ok(a), Ok(b)) => a + b,
                (Err(FaddeevaError::Overflow(_)), _) | (_, Err(FaddeevaError::Overflow(_))) => continue,
                (Err(e), _) | (_, Err(e)) => panic!("{e}"),
            };
            let rhs = 2.0 * (-z * z).exp();
            let scale = rhs.norm().max(1.0);
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    assert!(worst < 1e-12, "worst identity defect {worst:e}");
}

#[test]
fn bounded_in_closed_upper_half_plane() {
    for i in 0..200 {
        for k in 0..50 {
            let z = c(-50.0 + 0.5 * i as f64, 0.2 * k as f64);
            let value = w(z).unwrap();
            assert!(value.norm() <= 1.0 + 1e-14, "|w({z})| = {}", value.norm());
        }
    }
}

#[test]
fn overflow_is_reported_not_returned() {
    let z = c(0.0, -30.0);
    assert!(matches!(w(z), Err(FaddeevaError::Overflow(_))));
    assert!(matches!(w_reflect(-z), Err(FaddeevaError::Overflow(_))));
    assert!(matches!(w(c(f64::NAN, 0.0)), Err(FaddeevaError::NonFinite(_))));
}

proptest! {
    #[test]
    fn conjugate_symmetry(x in -30.0f64..30.0, y in 0.0f64..30.0) {
        let z = c(x, y);
        let lhs = w(-z.conj()).unwrap();
        let rhs = w(z).unwrap().conj();
        prop_assert!((lhs - rhs).norm() <= 1e-15 * rhs.norm().max(1e-300));
    }

    #[test]
    fn upper_half_plane_is_bounded(x in -1e3f64..1e3, y in 0.0f64..1e3) {
        prop_assert!(w(c(x, y)).unwrap().norm() <= 1.0 + 1e-14);
    }

    #[test]
    fn reflect_matches_definition(x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let z = c(x, y);
        let gaussian = 2.0 * (-z * z).exp();
        let direct = gaussian - w(z).unwrap();
        let reflected = w_reflect(z).unwrap();
        prop_assert!((direct - reflected).norm() <= 1e-13 * gaussian.norm().max(1.0));
    }
}
