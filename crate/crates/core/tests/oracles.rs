use std::f64::consts::PI;

use proptest::prelude::*;
use radial_dichotomy::oracles::{
    bessel_zero, harmonic_trace, manufactured_problem, spherical_bessel, spherical_bessel_derivative, Descriptor,
    ExactSolution, HarmonicSign, ManufacturedProblem,
};
use radial_dichotomy::ses::ses_residual;
use radial_dichotomy::sphere::{enumerate_modes, ModeIndex};

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn j1(x: f64) -> f64 {
    x.sin() / (x * x) - x.cos() / x
}

#[test]
fn bessel_examples() {
    for x in [0.5, 1.0, 3.0, 10.0, 40.0] {
        assert!((spherical_bessel(0, x) - x.sin() / x).abs() < 1e-15);
        assert!((spherical_bessel(1, x) - j1(x)).abs() < 1e-14);
    }
    assert_eq!(spherical_bessel(0, 0.0), 1.0);
    assert_eq!(spherical_bessel(3, 0.0), 0.0);
    assert!(spherical_bessel(0, PI).abs() < 1e-15);
    assert!((bessel_zero(0, 2).unwrap() - 2.0 * PI).abs() < 1e-12);
    assert!((bessel_zero(1, 1).unwrap() - 4.493409457909064).abs() < 1e-12);
    // independent bisection on the closed form of j_1
    let (mut lo, mut hi) = (4.0, 5.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if j1(lo) * j1(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((bessel_zero(1, 1).unwrap() - lo).abs() < 1e-12);
}

#[test]
fn bessel_zeros_increase_and_interlace() {
    for l in 0..6 {
        let zeros: Vec<f64> = (1..=6).map(|k| bessel_zero(l, k).unwrap()).collect();
        assert!(zeros.windows(2).all(|w| w[0] < w[1]));
        let next: Vec<f64> = (1..=5).map(|k| bessel_zero(l + 1, k).unwrap()).collect();
        for k in 0..5 {
            assert!(zeros[k] < next[k] && next[k] < zeros[k + 1], "l = {l} k = {k}");
        }
        for z in &zeros {
            assert!(spherical_bessel(l, *z).abs() < 1e-11);
        }
    }
    assert!(bessel_zero(0, 0).is_err());
}

#[test]
fn harmonic_trace_examples() {
    let y10 = ModeIndex::new(1, 0);
    for t in [0.2, 1.0, 3.0] {
        let x = harmonic_trace(3, 1, y10, HarmonicSign::Plus, t).unwrap();
        assert!((x.f.coeff(y10, 0).unwrap().re - t).abs() < 1e-15);
        assert!((x.g.coeff(y10, 0).unwrap().re - 1.0).abs() < 1e-15);
        let x = harmonic_trace(3, 1, ModeIndex::new(0, 0), HarmonicSign::Plus, t).unwrap();
        assert_eq!((x.f.coeffs[0].re, x.g.coeffs[0].re), (1.0, 0.0));
    }
    let x = harmonic_trace(3, 0, ModeIndex::new(0, 0), HarmonicSign::Minus, 2.0).unwrap();
    assert_eq!((x.f.coeffs[0].re, x.g.coeffs[0].re), (0.5, -0.25));
}

#[test]
fn registered_solutions_solve_trace_system() {
    let mut solutions = Vec::new();
    for n in [2, 3] {
        for m in enumerate_modes(n, 3) {
            for sign in [HarmonicSign::Plus, HarmonicSign::Minus] {
                if let Ok(s) = ExactSolution::new(n, 3, Descriptor::Harmonic { mode: m, sign }) {
                    solutions.push(s);
                }
            }
        }
    }
    for m in enumerate_modes(3, 2) {
        solutions.push(ExactSolution::new(3, 2, Descriptor::BesselMode { mode: m, lambda: 12.0 }).unwrap());
    }
    solutions.push(ExactSolution::new(3, 1, Descriptor::Fundamental).unwrap());
    solutions.push(ExactSolution::new(2, 1, Descriptor::LogMode).unwrap());
    for name in ManufacturedProblem::names() {
        solutions.push(ExactSolution::new(3, 1, Descriptor::Manufactured(name.to_string())).unwrap());
    }
    for s in &solutions {
        let (lo, hi) = s.valid_range();
        let (a, b) = (lo.max(0.5), hi.min(1.5));
        let traj = s.trajectory(&grid(a, b, 20001)).unwrap();
        let res = if let Descriptor::Manufactured(name) = &s.descriptor {
            manufactured_problem(name, s.n, s.l_max).unwrap().residual(&grid(a, b, 20001)).unwrap()
        } else {
            ses_residual(&traj, &s.potential()).unwrap()
        };
        assert!(res < 1e-6, "{:?}: {res}", s.descriptor);
    }
}

#[test]
fn manufactured_examples() {
    let g = manufactured_problem("gaussian-linear", 3, 2).unwrap();
    assert!(g.residual(&grid(0.1, 2.0, 8001)).unwrap() < 1e-6);
    let c = manufactured_problem("cubic-forced", 3, 2).unwrap();
    assert_eq!(c.exact.trace(1.0).unwrap().f.l2_norm(), 0.0);
    assert_eq!(c.radius, Some(1.0));
    let z = manufactured_problem("zero", 3, 2).unwrap();
    assert!(z.exact.trajectory(&[0.3, 1.0, 7.0]).unwrap().iter().all(|x| x.f.l2_norm() == 0.0 && x.g.l2_norm() == 0.0));
    assert!(manufactured_problem("unknown", 3, 2).is_err());
}

#[test]
fn invalid_descriptors_are_rejected() {
    let o = ModeIndex::new(0, 0);
    assert!(ExactSolution::new(2, 1, Descriptor::Harmonic { mode: o, sign: HarmonicSign::Minus }).is_err());
    assert!(ExactSolution::new(2, 1, Descriptor::Fundamental).is_err());
    assert!(ExactSolution::new(3, 1, Descriptor::LogMode).is_err());
    assert!(ExactSolution::new(2, 1, Descriptor::BesselMode { mode: o, lambda: 1.0 }).is_err());
    assert!(ExactSolution::new(3, 1, Descriptor::Harmonic { mode: ModeIndex::new(2, 0), sign: HarmonicSign::Plus }).is_err());
    let s = ExactSolution::new(3, 1, Descriptor::Fundamental).unwrap();
    assert!(s.trace(0.0).is_err());
}

proptest! {
    #[test]
    fn bessel_recurrence(l in 1usize..12, x in 0.05f64..60.0) {
        let lhs = spherical_bessel(l - 1, x) + spherical_bessel(l + 1, x);
        let rhs = (2 * l + 1) as f64 / x * spherical_bessel(l, x);
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs() + lhs.abs()) + 1e-300);
    }

    #[test]
    fn bessel_derivative_matches_difference(l in 0usize..8, x in 0.5f64..30.0) {
        let h = 1e-5;
        let fd = (spherical_bessel(l, x + h) - spherical_bessel(l, x - h)) / (2.0 * h);
        prop_assert!((spherical_bessel_derivative(l, x) - fd).abs() < 1e-8);
    }
}
