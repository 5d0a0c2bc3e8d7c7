use proptest::prelude::*;
use radial_dichotomy::sphere::{
    complex_to_real, enumerate_modes, evaluate_basis, lb_eigenvalue, mode_count, project_pointwise_product,
    quadrature_inner_product, real_to_complex, sobolev_norm, ModeIndex, SphereField, SphereQuadrature,
};

fn y(n: usize, l_max: usize, l: usize, m: i64) -> SphereField {
    SphereField::mode(n, l_max, ModeIndex::new(l, m), 1.0).unwrap()
}

#[test]
fn laplace_beltrami_eigenvalues() {
    assert_eq!(lb_eigenvalue(3, 2).unwrap(), 6.0);
    assert_eq!(lb_eigenvalue(3, 0).unwrap(), 0.0);
    assert_eq!(lb_eigenvalue(2, 4).unwrap(), 16.0);
    assert!(lb_eigenvalue(1, 2).is_err());
    assert!(lb_eigenvalue(3, -1).is_err());
}

#[test]
fn mode_enumeration() {
    assert_eq!(enumerate_modes(3, 2).len(), 9);
    assert_eq!(enumerate_modes(3, 0).len(), 1);
    assert_eq!(enumerate_modes(2, 1).len(), 3);
    for l_max in 0..6 {
        let modes = enumerate_modes(3, l_max);
        assert_eq!(modes.len(), (l_max + 1) * (l_max + 1));
        assert_eq!(mode_count(3, l_max), modes.len());
        assert!(modes.windows(2).all(|w| (w[0].l, w[0].m) < (w[1].l, w[1].m)));
        assert_eq!(modes, enumerate_modes(3, l_max));
    }
}

#[test]
fn sobolev_norm_examples() {
    assert!((sobolev_norm(&y(3, 2, 1, 0), 0.5) - 3f64.powf(0.25)).abs() < 1e-14);
    for s in [-1.0, -0.5, 0.0, 0.5, 2.0] {
        assert!((sobolev_norm(&y(3, 2, 0, 0), s) - 1.0).abs() < 1e-15);
    }
    let f = y(3, 2, 2, 0).add(&y(3, 2, 0, 0)).unwrap();
    let expected = (1.0 + 7f64.powf(-0.5)).sqrt();
    assert!((sobolev_norm(&f, -0.5) - expected).abs() < 1e-14);
}

#[test]
fn basis_is_orthonormal_under_quadrature() {
    for n in [2, 3] {
        let l_max = 4;
        let modes = enumerate_modes(n, l_max);
        for a in &modes {
            for b in &modes {
                let ip = quadrature_inner_product(&y(n, l_max, a.l, a.m), &y(n, l_max, b.l, b.m)).unwrap();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-13 && ip.im.abs() < 1e-14, "{a:?} {b:?} {ip}");
            }
        }
    }
}

#[test]
fn product_with_first_zonal_harmonic() {
    let l_max = 3;
    let f = y(3, l_max, 1, 0);
    let c = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let quad = SphereQuadrature::new(3, 2 * l_max + 2).unwrap();
    let out = project_pointwise_product(|x| c * x[2], &f, &quad).unwrap();
    // brute-force oracle on a fine rule
    let fine = SphereQuadrature::new(3, 40).unwrap();
    for (k, m) in enumerate_modes(3, l_max).iter().enumerate() {
        let mut acc = 0.0;
        for (node, w) in fine.nodes.iter().zip(&fine.weights) {
            let b = evaluate_basis(3, l_max, node);
            acc += w * c * node[2] * b[2] * b[k];
        }
        assert!((out.coeffs[k].re - acc).abs() < 1e-13, "{m:?}");
        let nonzero = acc.abs() > 1e-12;
        assert_eq!(nonzero, m.m == 0 && (m.l == 0 || m.l == 2), "{m:?}");
    }
}

#[test]
fn product_with_constant_and_zero() {
    let quad = SphereQuadrature::new(3, 6).unwrap();
    let f = SphereField::from_real(3, 2, 1, &[0.3, -1.0, 0.2, 0.5, 0.0, 1.1, -0.4, 0.9, 0.05]).unwrap();
    let out = project_pointwise_product(|_| 2.5, &f, &quad).unwrap();
    assert!(out.sub(&f.scaled(2.5)).unwrap().l2_norm() < 1e-13);
    let zero = SphereField::zeros(3, 2, 1);
    assert_eq!(project_pointwise_product(|x| x[0], &zero, &quad).unwrap().l2_norm(), 0.0);
    let coarse = SphereQuadrature::new(3, 2).unwrap();
    assert!(project_pointwise_product(|_| 1.0, &f, &coarse).is_err());
}

fn field_strategy(n: usize, l_max: usize) -> impl Strategy<Value = SphereField> {
    let count = mode_count(n, l_max);
    prop::collection::vec(-1.0f64..1.0, count).prop_map(move |v| SphereField::from_real(n, l_max, 1, &v).unwrap())
}

proptest! {
    #[test]
    fn parseval(f in field_strategy(3, 4), g in field_strategy(2, 5)) {
        for h in [f, g] {
            let ip = quadrature_inner_product(&h, &h).unwrap();
            let sum: f64 = h.coeffs.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((ip.re - sum).abs() < 1e-10);
            prop_assert!((sobolev_norm(&h, 0.0) - h.l2_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplication_bound(f in field_strategy(3, 4), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let quad = SphereQuadrature::new(3, 12).unwrap();
        let v = |x: &[f64]| a + b * x[0] * x[1];
        let sup = a.abs() + 0.5 * b.abs();
        let out = project_pointwise_product(v, &f, &quad).unwrap();
        prop_assert!(out.l2_norm() <= sup * f.l2_norm() * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn complex_conversion_roundtrip(f in field_strategy(3, 3)) {
        let back = complex_to_real(&real_to_complex(&f).unwrap()).unwrap();
        prop_assert!(back.sub(&f).unwrap().l2_norm() < 1e-14);
        let c = real_to_complex(&f).unwrap();
        prop_assert!((c.l2_norm() - f.l2_norm()).abs() < 1e-13);
    }
}
