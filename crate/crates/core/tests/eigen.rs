use std::time::Instant;

use radial_dichotomy::eigen::{
    evans_determinant, intersection_dimension, scan_eigenvalues, unstable_frame, DirichletSubspace, EigenConfig,
};
use radial_dichotomy::oracles::bessel_zero;
use radial_dichotomy::ses::PotentialSpec;

fn bessel_squares(t: f64, hi: f64) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    for l in 0..10 {
        for k in 1..10 {
            let z = bessel_zero(l, k).unwrap() / t;
            if z * z < hi {
                out.push((z * z, l));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[test]
fn free_ball_spectrum_matches_bessel_zeros() {
    let cfg = EigenConfig::new(3, 0.5, 4);
    let start = Instant::now();
    let res = scan_eigenvalues(&PotentialSpec::zero(), 1.0, (1.0, 35.0), 120, 1e-10, &cfg).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let expected = bessel_squares(1.0, 35.0);
    assert_eq!(res.eigenvalues.len(), expected.len());
    for (root, (lam, l)) in res.eigenvalues.iter().zip(&expected) {
        assert!((root.lambda - lam).abs() < 1e-6, "{} vs {}", root.lambda, lam);
        assert_eq!(root.degree, Some(*l));
        assert_eq!(root.multiplicity, 2 * l + 1);
    }
    assert!(elapsed < 60.0, "{elapsed}");
}

#[test]
fn detector_vanishes_at_first_dirichlet_eigenvalue() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let pi2 = std::f64::consts::PI.powi(2);
    let at_root = evans_determinant(pi2, &PotentialSpec::zero(), 1.0, &cfg).unwrap();
    let below = evans_determinant(1.0, &PotentialSpec::zero(), 1.0, &cfg).unwrap();
    assert!(at_root.abs() < 1e-9, "{at_root}");
    assert!(below.abs() > 1e-3, "{below}");
}

#[test]
fn shifting_potential_and_lambda_together_is_invisible() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let v = PotentialSpec::radial_polynomial(vec![1.0, 0.0, 2.0]);
    let a = evans_determinant(12.0, &v, 1.0, &cfg).unwrap();
    let b = evans_determinant(9.0, &v.clone().with_shift(-3.0), 1.0, &cfg).unwrap();
    assert!((a - b).abs() < 1e-12, "{a} {b}");
}

#[test]
fn constant_potential_shifts_spectrum() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let base = scan_eigenvalues(&PotentialSpec::zero(), 1.0, (1.0, 35.0), 60, 1e-10, &cfg).unwrap();
    let shifted = scan_eigenvalues(&PotentialSpec::constant(2.5), 1.0, (3.5, 37.5), 60, 1e-10, &cfg).unwrap();
    assert_eq!(base.eigenvalues.len(), shifted.eigenvalues.len());
    for (a, b) in base.eigenvalues.iter().zip(&shifted.eigenvalues) {
        assert!((b.lambda - a.lambda - 2.5).abs() < 1e-8);
        assert_eq!(a.multiplicity, b.multiplicity);
    }
}

#[test]
fn half_radius_scales_spectrum_by_four() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let unit = scan_eigenvalues(&PotentialSpec::zero(), 1.0, (1.0, 35.0), 60, 1e-10, &cfg).unwrap();
    let half = scan_eigenvalues(&PotentialSpec::zero(), 0.5, (4.0, 140.0), 120, 1e-9, &cfg).unwrap();
    let small: Vec<_> = half.eigenvalues.iter().filter(|r| r.lambda < 140.0 && r.degree <= Some(2)).collect();
    assert!(small.len() >= unit.eigenvalues.len());
    for a in &unit.eigenvalues {
        let hit = small.iter().any(|b| (b.lambda - 4.0 * a.lambda).abs() < 1e-7 && b.degree == a.degree);
        assert!(hit, "missing {}", 4.0 * a.lambda);
    }
}

#[test]
fn roots_do_not_depend_on_alpha() {
    let roots = |alpha| {
        let cfg = EigenConfig::new(3, alpha, 2);
        scan_eigenvalues(&PotentialSpec::zero(), 1.0, (1.0, 35.0), 60, 1e-10, &cfg).unwrap().counted()
    };
    let a = roots(0.3);
    let b = roots(0.9);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn smaller_ball_has_larger_eigenvalues() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let first = |t: f64| {
        scan_eigenvalues(&PotentialSpec::zero(), t, (1.0, 40.0), 80, 1e-10, &cfg).unwrap().eigenvalues[0].lambda
    };
    let (a, b, c) = (first(1.0), first(0.9), first(0.8));
    assert!(a < b && b < c);
}

#[test]
fn full_determinant_path_counts_multiplicity() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let v = PotentialSpec::custom(false, 1.0, |_, _| 1.0);
    let res = scan_eigenvalues(&v, 1.0, (1.0, 25.0), 48, 1e-10, &cfg).unwrap();
    let expected = bessel_squares(1.0, 24.0);
    assert_eq!(res.eigenvalues.len(), expected.len());
    for (root, (lam, l)) in res.eigenvalues.iter().zip(&expected) {
        assert!((root.lambda - lam - 1.0).abs() < 1e-6, "{} vs {}", root.lambda, lam + 1.0);
        assert_eq!(root.multiplicity, 2 * l + 1);
        assert_eq!(root.degree, None);
    }
}

#[test]
fn intersection_dimension_counts_dirichlet_directions() {
    let cfg = EigenConfig::new(3, 0.5, 2);
    let pi2 = std::f64::consts::PI.powi(2);
    let generic = unstable_frame(0.0, &PotentialSpec::zero(), 1.0, &cfg).unwrap();
    assert_eq!(intersection_dimension(&generic, &DirichletSubspace, 1e-8), 0);
    let at_root = unstable_frame(pi2, &PotentialSpec::zero(), 1.0, &cfg).unwrap();
    assert!(intersection_dimension(&at_root, &DirichletSubspace, 1e-8) >= 1);
    let mut empty = generic.clone();
    empty.vectors = nalgebra::DMatrix::zeros(generic.vectors.nrows(), 0);
    assert_eq!(intersection_dimension(&empty, &DirichletSubspace, 1e-8), 0);
}

#[test]
fn forbidden_alpha_and_endpoint_roots_are_reported() {
    let pi2 = std::f64::consts::PI.powi(2);
    let bad = EigenConfig::new(3, 1.2, 2);
    assert!(evans_determinant(1.0, &PotentialSpec::zero(), 1.0, &bad).is_err());
    let cfg = EigenConfig::new(3, 0.5, 1);
    let err = scan_eigenvalues(&PotentialSpec::zero(), 1.0, (pi2, 15.0), 10, 1e-10, &cfg).unwrap_err();
    assert!(matches!(err, radial_dichotomy::Error::EndpointRoot { .. }), "{err}");
}
