use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::modes::{check_dimension, eigenvalue, enumerate_modes, mode_count, ModeIndex};
use super::quadrature::{evaluate_basis, SphereQuadrature};
use crate::error::{Error, Result};

/// A `C^N`-valued function on `S^{n-1}` stored as coefficients over the real
/// orthonormal Laplace–Beltrami basis, truncated at degree `l_max`.
///
/// Coefficient layout is mode-major: index `k * n_sys + c` holds component
/// `c` of mode `k` in [`enumerate_modes`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereField {
    pub n: usize,
    pub l_max: usize,
    pub n_sys: usize,
    pub coeffs: Vec<Complex64>,
}

impl SphereField {
    pub fn zeros(n: usize, l_max: usize, n_sys: usize) -> Self {
        let len = mode_count(n, l_max) * n_sys;
        Self { n, l_max, n_sys, coeffs: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_real(n: usize, l_max: usize, n_sys: usize, values: &[f64]) -> Result<Self> {
        let mut f = Self::zeros(n, l_max, n_sys);
        if values.len() != f.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients, got {}",
                f.coeffs.len(),
                values.len()
            )));
        }
        for (c, v) in f.coeffs.iter_mut().zip(values) {
            *c = Complex64::new(*v, 0.0);
        }
        Ok(f)
    }

    /// Scalar field holding a single basis function.
    pub fn mode(n: usize, l_max: usize, mode: ModeIndex, value: f64) -> Result<Self> {
        let mut f = Self::zeros(n, l_max, 1);
        let k = f.mode_position(mode)?;
        f.coeffs[k] = Complex64::new(value, 0.0);
        Ok(f)
    }

    pub fn modes(&self) -> Vec<ModeIndex> {
        enumerate_modes(self.n, self.l_max)
    }

    pub fn mode_position(&self, mode: ModeIndex) -> Result<usize> {
        self.modes()
            .iter()
            .position(|m| *m == mode)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {mode:?} not in basis (n = {}, l_max = {})", self.n, self.l_max)))
    }

    pub fn coeff(&self, mode: ModeIndex, component: usize) -> Result<Complex64> {
        Ok(self.coeffs[self.mode_position(mode)? * self.n_sys + component])
    }

    /// `-Δ` eigenvalue attached to each coefficient slot.
    pub fn slot_eigenvalues(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for mode in self.modes() {
            let lam = eigenvalue(self.n, mode.l);
            out.extend(std::iter::repeat_n(lam, self.n_sys));
        }
        out
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n && self.l_max == other.l_max && self.n_sys == other.n_sys
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "fields differ: (n, l_max, N) = ({}, {}, {}) vs ({}, {}, {})",
                self.n, self.l_max, self.n_sys, other.n, other.l_max, other.n_sys
            )))
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Coefficient-space inner product `Σ c_k(self) conj(c_k(other))`.
    pub fn dot(&self, other: &Self) -> Result<Complex64> {
        self.check_shape(other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    /// Point value of component `component` at the unit vector `point`.
    pub fn evaluate(&self, point: &[f64], component: usize) -> Complex64 {
        let basis = evaluate_basis(self.n, self.l_max, point);
        basis.iter().enumerate().map(|(k, y)| self.coeffs[k * self.n_sys + component] * *y).sum()
    }
}

/// Spectral Sobolev norm `sqrt(Σ (1 + λ_k)^s |c_k|²)`.
pub fn sobolev_norm(f: &SphereField, s: f64) -> f64 {
    f.slot_eigenvalues()
        .iter()
        .zip(&f.coeffs)
        .map(|(lam, c)| (1.0 + lam).powf(s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `L²(S^{n-1})` inner product `∫ f · conj(g)` evaluated by quadrature.
pub fn quadrature_inner_product(f: &SphereField, g: &SphereField) -> Result<Complex64> {
    f.check_shape(g)?;
    let quad = SphereQuadrature::new(f.n, 2 * f.l_max)?;
    let table = quad.basis_table(f.l_max);
    let vf = values_at_nodes(f, &table);
    let vg = values_at_nodes(g, &table);
    let mut acc = Complex64::new(0.0, 0.0);
    for (q, w) in quad.weights.iter().enumerate() {
        for c in 0..f.n_sys {
            acc += vf[(q, c)] * vg[(q, c)].conj() * *w;
        }
    }
    Ok(acc)
}

fn values_at_nodes(f: &SphereField, table: &DMatrix<f64>) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(table.nrows(), f.n_sys, Complex64::new(0.0, 0.0));
    for q in 0..table.nrows() {
        for k in 0..table.ncols() {
            let y = table[(q, k)];
            if y == 0.0 {
                continue;
            }
            for c in 0..f.n_sys {
                out[(q, c)] += f.coeffs[k * f.n_sys + c] * y;
            }
        }
    }
    out
}

/// Galerkin projection of pointwise products onto degree `<= l_max`.
///
/// Holds a quadrature rule and its basis table so repeated projections
/// (one per integrator stage) do not rebuild them.
#[derive(Debug, Clone)]
pub struct ProductProjector {
    pub n: usize,
    pub l_max: usize,
    pub quadrature: SphereQuadrature,
    table: DMatrix<f64>,
}

impl ProductProjector {
    /// Uses a rule of degree `2 l_max + extra`.
    pub fn new(n: usize, l_max: usize, extra: usize) -> Result<Self> {
        Self::with_quadrature(l_max, SphereQuadrature::new(n, 2 * l_max + extra)?)
    }

    pub fn with_quadrature(l_max: usize, quadrature: SphereQuadrature) -> Result<Self> {
        check_dimension(quadrature.n)?;
        if quadrature.degree < 2 * l_max {
            return Err(Error::QuadratureResolution { required: 2 * l_max, available: quadrature.degree });
        }
        let table = quadrature.basis_table(l_max);
        Ok(Self { n: quadrature.n, l_max, quadrature, table })
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }

    /// Galerkin matrix `G_jk = ∫ V Y_j Y_k` of a scalar multiplier.
    pub fn multiplier_matrix(&self, mut v: impl FnMut(&[f64]) -> f64) -> DMatrix<f64> {
        let m = self.table.ncols();
        let mut weighted = self.table.clone();
        for (q, node) in self.quadrature.nodes.iter().enumerate() {
            let s = self.quadrature.weights[q] * v(node);
            weighted.row_mut(q).scale_mut(s);
        }
        let g = self.table.transpose() * weighted;
        debug_assert_eq!(g.nrows(), m);
        g
    }

    /// Projection of `V · f` for a scalar multiplier `V`.
    pub fn project(&self, mut v: impl FnMut(&[f64]) -> f64, f: &SphereField) -> Result<SphereField> {
        if f.n != self.n || f.l_max != self.l_max {
            return Err(Error::DimensionMismatch("field does not match projector basis".into()));
        }
        let vals = values_at_nodes(f, &self.table);
        let mut out = SphereField::zeros(f.n, f.l_max, f.n_sys);
        for (q, node) in self.quadrature.nodes.iter().enumerate() {
            let s = self.quadrature.weights[q] * v(node);
            if s == 0.0 {
                continue;
            }
            for k in 0..self.table.ncols() {
                let y = self.table[(q, k)] * s;
                for c in 0..f.n_sys {
                    out.coeffs[k * f.n_sys + c] += vals[(q, c)] * y;
                }
            }
        }
        Ok(out)
    }

    /// Node values of a real coefficient vector (`n_sys = 1`).
    pub(crate) fn synthesize_real(&self, coeffs: &[f64], out: &mut [f64]) {
        for (q, slot) in out.iter_mut().enumerate() {
            *slot = (0..self.table.ncols()).map(|k| self.table[(q, k)] * coeffs[k]).sum();
        }
    }

    /// Projection of real node values onto real coefficients (`n_sys = 1`).
    pub(crate) fn analyze_real(&self, values: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        for (q, v) in values.iter().enumerate() {
            let s = self.quadrature.weights[q] * v;
            for (k, c) in out.iter_mut().enumerate() {
                *c += self.table[(q, k)] * s;
            }
        }
    }
}

/// Project the pointwise product `V · f` onto degree `<= l_max`.
pub fn project_pointwise_product(
    v: impl Fn(&[f64]) -> f64,
    f: &SphereField,
    quadrature: &SphereQuadrature,
) -> Result<SphereField> {
    ProductProjector::with_quadrature(f.l_max, quadrature.clone())?.project(v, f)
}

/// Real-basis coefficients to complex `Y_l^m` (Condon–Shortley) coefficients, `n = 3`.
pub fn real_to_complex(f: &SphereField) -> Result<SphereField> {
    convert(f, true)
}

/// Inverse of [`real_to_complex`].
pub fn complex_to_real(f: &SphereField) -> Result<SphereField> {
    convert(f, false)
}

fn convert(f: &SphereField, to_complex: bool) -> Result<SphereField> {
    if f.n != 3 {
        return Err(Error::InvalidArgument("complex harmonic conversion is defined for n = 3".into()));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::new(0.0, 1.0);
    let modes = f.modes();
    let pos = |l: usize, m: i64| (l * l) as i64 + l as i64 + m;
    let mut out = f.clone();
    for (k, mode) in modes.iter().enumerate() {
        if mode.m <= 0 {
            continue;
        }
        let kp = k;
        let kn = pos(mode.l, -mode.m) as usize;
        let sign = if mode.m % 2 == 0 { 1.0 } else { -1.0 };
        for c in 0..f.n_sys {
            let a = f.coeffs[kp * f.n_sys + c];
            let b = f.coeffs[kn * f.n_sys + c];
            let (p, q) = if to_complex {
                // a = real cos-coefficient, b = real sin-coefficient
                (sign * s * (a - i * b), s * (a + i * b))
            } else {
                // a = complex Y_l^m, b = complex Y_l^{-m}
                (s * (sign * a + b), s * (b - sign * a) / i)
            };
            out.coeffs[kp * f.n_sys + c] = p;
            out.coeffs[kn * f.n_sys + c] = q;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mode(l: usize, m: i64, l_max: usize) -> SphereField {
        SphereField::mode(3, l_max, ModeIndex::new(l, m), 1.0).unwrap()
    }

    #[test]
    fn sobolev_examples() {
        let y10 = mode(1, 0, 2);
        assert!((sobolev_norm(&y10, 0.5) - 3f64.powf(0.25)).abs() < 1e-14);
        assert!((sobolev_norm(&y10, 0.5) - 1.31607).abs() < 1e-5);
        let y00 = mode(0, 0, 2);
        for s in [-1.5, -0.5, 0.0, 0.5, 2.0] {
            assert!((sobolev_norm(&y00, s) - 1.0).abs() < 1e-15);
        }
        let sum = mode(2, 0, 2).add(&y00).unwrap();
        // direct summation: (1+6)^{-1/2} |1|^2 + (1+0)^{-1/2} |1|^2
        let oracle = (7f64.powf(-0.5) + 1.0).sqrt();
        assert!((sobolev_norm(&sum, -0.5) - oracle).abs() < 1e-15);
        assert!((oracle - 1.17387).abs() < 1e-5);
    }

    #[test]
    fn inner_products_are_orthonormal() {
        let l_max = 3;
        let modes = enumerate_modes(3, l_max);
        for a in &modes {
            for b in &modes {
                let ip = quadrature_inner_product(&mode(a.l, a.m, l_max), &mode(b.l, b.m, l_max)).unwrap();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-13 && ip.im.abs() < 1e-15);
            }
        }
        let bad = SphereField::zeros(3, 2, 1);
        assert!(quadrature_inner_product(&bad, &mode(0, 0, 3)).is_err());
    }

    #[test]
    fn product_examples() {
        let quad = SphereQuadrature::new(3, 8).unwrap();
        let f = mode(1, 0, 3).add(&mode(2, -1, 3).scaled(0.5)).unwrap();
        let cf = project_pointwise_product(|_| 2.5, &f, &quad).unwrap();
        assert!(cf.sub(&f.scaled(2.5)).unwrap().l2_norm() < 1e-13);
        let zero = SphereField::zeros(3, 3, 1);
        assert_eq!(project_pointwise_product(|x| x[2], &zero, &quad).unwrap().l2_norm(), 0.0);
        let coarse = SphereQuadrature::new(3, 4).unwrap();
        assert!(matches!(
            project_pointwise_product(|_| 1.0, &f, &coarse),
            Err(Error::QuadratureResolution { .. })
        ));
    }

    #[test]
    fn y10_squared_has_only_l0_and_l2() {
        // brute-force oracle: high-resolution quadrature of Y10 * Y10 * Y_k
        let l_max = 4;
        let y10 = |x: &[f64]| (3.0 / (4.0 * std::f64::consts::PI)).sqrt() * x[2];
        let quad = SphereQuadrature::new(3, 2 * l_max).unwrap();
        let out = project_pointwise_product(y10, &mode(1, 0, l_max), &quad).unwrap();
        let fine = SphereQuadrature::new(3, 40).unwrap();
        let table = fine.basis_table(l_max);
        for (k, m) in enumerate_modes(3, l_max).iter().enumerate() {
            let oracle: f64 = (0..fine.len()).map(|q| fine.weights[q] * y10(&fine.nodes[q]).powi(2) * table[(q, k)]).sum();
            assert!((out.coeffs[k].re - oracle).abs() < 1e-13);
            if m.l != 0 && m.l != 2 {
                assert!(out.coeffs[k].norm() < 1e-13);
            }
        }
        assert!(out.coeff(ModeIndex::new(0, 0), 0).unwrap().re.abs() > 0.1);
        assert!(out.coeff(ModeIndex::new(2, 0), 0).unwrap().re.abs() > 0.1);
    }

    #[test]
    fn complex_conversion_of_y11() {
        // Y_1^1 = -(R_{1,1} + i R_{1,-1}) / sqrt 2, so R_{1,1} has complex coefficients
        // <R11, Y_1^1> = -1/sqrt2 and <R11, Y_1^-1> = 1/sqrt2
        let c = real_to_complex(&mode(1, 1, 1)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.coeff(ModeIndex::new(1, 1), 0).unwrap() - Complex64::new(-s, 0.0)).norm() < 1e-15);
        assert!((c.coeff(ModeIndex::new(1, -1), 0).unwrap() - Complex64::new(s, 0.0)).norm() < 1e-15);
    }

    fn random_field(l_max: usize, seed: &[f64]) -> SphereField {
        let mut f = SphereField::zeros(3, l_max, 1);
        for (c, v) in f.coeffs.iter_mut().zip(seed.iter().cycle()) {
            *c = Complex64::new(*v, 0.0);
        }
        f
    }

    proptest! {
        #[test]
        fn parseval(seed in proptest::collection::vec(-1.0f64..1.0, 1..40), l_max in 0usize..6) {
            let f = random_field(l_max, &seed);
            let ip = quadrature_inner_product(&f, &f).unwrap();
            prop_assert!((ip.re - f.l2_norm().powi(2)).abs() < 1e-10);
            prop_assert!((sobolev_norm(&f, 0.0) - f.l2_norm()).abs() < 1e-12);
        }

        #[test]
        fn complex_round_trip(seed in proptest::collection::vec(-1.0f64..1.0, 1..40), l_max in 0usize..5) {
            let f = random_field(l_max, &seed);
            let back = complex_to_real(&real_to_complex(&f).unwrap()).unwrap();
            prop_assert!(back.sub(&f).unwrap().l2_norm() < 1e-13);
            // the conversion is unitary
            prop_assert!((real_to_complex(&f).unwrap().l2_norm() - f.l2_norm()).abs() < 1e-12);
        }

        #[test]
        fn multiplication_bound(seed in proptest::collection::vec(-1.0f64..1.0, 4..30), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            // ‖Π(Vf)‖_{H^{-1/2}} <= sup|V| ‖f‖_{H^{-1/2}} up to truncation
            let l_max = 3;
            let f = random_field(l_max, &seed);
            let v = |x: &[f64]| a + b * x[0] * x[1];
            let sup = a.abs() + b.abs() / 2.0;
            let quad = SphereQuadrature::new(3, 2 * l_max + 6).unwrap();
            let vf = project_pointwise_product(v, &f, &quad).unwrap();
            // truncation allowance: the discarded part is bounded by the H^{-1/2} weight at l_max + 1
            let trunc = sup * f.l2_norm();
            prop_assert!(sobolev_norm(&vf, -0.5) <= sup * sobolev_norm(&f, -0.5) + trunc);
            prop_assert!(vf.l2_norm() <= sup * f.l2_norm() + 1e-12);
        }
    }
}
