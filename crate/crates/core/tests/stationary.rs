use num_complex::Complex64;
use proptest::prelude::*;
use wavepacket_core::{Barrier, Preset};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn momenta(n: usize) -> impl Iterator<Item = f64> {
    // Both signs, dense near zero and up to well above the barrier top.
    (0..n).map(move |k| {
        let s = (k as f64 + 0.5) / n as f64;
        let mag = 0.01 + 80.0 * s * s;
        if k % 2 == 0 {
            mag
        } else {
            -mag
        }
    })
}

fn unitarity_defect(barrier: &Barrier) -> f64 {
    momenta(1000)
        .map(|p| {
            let c = barrier.coefficients(Complex64::new(p, 0.0)).unwrap();
            (c.r.norm_sqr() + c.t.norm_sqr() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn flux_is_conserved_on_the_figure_barriers_and_a_well() {
    let barriers =
        [Preset::Fig1.scenario().barrier, Preset::Fig2.scenario().barrier, Barrier::atomic(-50.0, 2.5).unwrap()];
    for b in barriers {
        let defect = unitarity_defect(&b);
        assert!(defect <= 1e-12, "V0 = {}: |R|^2 + |T|^2 - 1 up to {defect:e}", b.v0);
    }
}

/// `Ω` in the textbook form, written with an explicit choice of `p''`.
fn omega_textbook(b: &Barrier, p: Complex64, p_dp: Complex64) -> Complex64 {
    let x = p_dp * b.d / b.hbar;
    x.cos() - 0.5 * I * (p_dp / p + p / p_dp) * x.sin()
}

#[test]
fn omega_does_not_depend_on_the_branch_of_p_double_prime() {
    let b = Preset::Fig1.scenario().barrier;
    for &(re, im) in &[(3.0, -0.5), (19.43, -0.003), (-25.0, -2.0), (40.0, 1.0), (0.7, -7.0)] {
        let p = Complex64::new(re, im);
        let root = b.p_double_prime(p);
        let value = b.omega(p).unwrap();
        for branch in [root, -root] {
            let other = omega_textbook(&b, p, branch);
            assert!((value - other).norm() <= 1e-12 * value.norm().max(1.0), "p = {p}");
        }
    }
}

#[test]
fn well_transmission_matches_closed_form() {
    let b = Barrier::atomic(-50.0, 2.5).unwrap();
    for p in [0.3, 1.0, 4.5, 12.0, 33.0] {
        let e = 0.5 * p * p;
        let k2 = (2.0 * (e - b.v0)).sqrt();
        let expected = 1.0 / (1.0 + b.v0 * b.v0 * (k2 * b.d).sin().powi(2) / (4.0 * e * (e - b.v0)));
        let t = b.transmission(Complex64::new(p, 0.0)).unwrap().norm_sqr();
        assert!((t - expected).abs() <= 1e-13, "p = {p}: {t} vs {expected}");
    }
}

#[test]
fn opaque_barrier_transmits_little_below_the_top() {
    let b = Preset::Fig2.scenario().barrier;
    let t = b.transmission(Complex64::new(20.0, 0.0)).unwrap().norm_sqr();
    assert!(t < 1e-6, "|T|^2 = {t:e}");
}

proptest! {
    #[test]
    fn unitarity_for_random_barriers(v0 in -500.0f64..500.0, d in 0.1f64..5.0, p in 0.05f64..60.0, sign in prop::bool::ANY) {
        let b = Barrier::atomic(v0, d).unwrap();
        let p = if sign { p } else { -p };
        let c = b.coefficients(Complex64::new(p, 0.0));
        prop_assume!(c.is_ok());
        let c = c.unwrap();
        prop_assert!((c.r.norm_sqr() + c.t.norm_sqr() - 1.0).abs() <= 1e-11);
    }

    #[test]
    fn reciprocity_on_the_real_axis(v0 in -300.0f64..300.0, p in 0.05f64..60.0) {
        let b = Barrier::atomic(v0, 2.5).unwrap();
        let forward = b.transmission(Complex64::new(p, 0.0)).unwrap();
        let backward = b.transmission(Complex64::new(-p, 0.0)).unwrap();
        prop_assert!((forward - backward.conj()).norm() <= 1e-12);
    }
}
