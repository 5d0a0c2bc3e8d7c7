use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use super::potential::PotentialSpec;
use crate::error::{Error, Result};
use crate::integrator::Generator;
use crate::sphere::{check_dimension, eigenvalue, enumerate_modes, ModeIndex, ProductProjector};

/// The rescaled system `d/dτ (f̃, g̃) = (A + B(τ)) (f̃, g̃)` on the truncated space.
///
/// Natural coordinates stack the real coefficient vectors of `f̃` and `g̃`
/// (slot `mode * N + component`). Weighted coordinates multiply each slot by
/// the `H^{1/2+β} ⊕ H^{-1/2+β}` weights so that Euclidean norms are `H` norms.
#[derive(Debug, Clone)]
pub struct SesOperator {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub l_max: usize,
    pub n_sys: usize,
    pub potential: PotentialSpec,
    modes: Vec<ModeIndex>,
    slot_degree: Vec<usize>,
    wf: Vec<f64>,
    wg: Vec<f64>,
    projector: Option<ProductProjector>,
}

/// Lower-left block of `B(τ)` in natural coordinates, acting per component.
#[derive(Debug, Clone)]
pub enum Coupling {
    Zero,
    /// Multiple of the identity.
    Diagonal(f64),
    /// Galerkin matrix over modes.
    Dense(DMatrix<f64>),
}

/// `exp(s [[α, 1], [λ, α + 2 - n]])` in natural coordinates.
pub fn block_exponential(n: usize, alpha: f64, l: usize, s: f64) -> Matrix2<f64> {
    let lambda = eigenvalue(n, l);
    let nu1 = l as f64;
    let nu2 = 2.0 - n as f64 - l as f64;
    let scale = (alpha * s).exp();
    if nu1 == nu2 {
        return Matrix2::new(1.0, s, 0.0, 1.0) * scale;
    }
    let k = Matrix2::new(0.0, 1.0, lambda, 2.0 - n as f64);
    let id = Matrix2::identity();
    ((k - id * nu2) * (nu1 * s).exp() - (k - id * nu1) * (nu2 * s).exp()) * (scale / (nu1 - nu2))
}

pub(crate) fn sobolev_weights(n: usize, l: usize, beta: f64) -> (f64, f64) {
    let lam = 1.0 + eigenvalue(n, l);
    (lam.powf((0.5 + beta) / 2.0), lam.powf((-0.5 + beta) / 2.0))
}

impl SesOperator {
    pub fn new(n: usize, alpha: f64, beta: f64, l_max: usize, n_sys: usize, potential: PotentialSpec) -> Result<Self> {
        check_dimension(n)?;
        if n_sys == 0 {
            return Err(Error::InvalidArgument("system size N must be at least 1".into()));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument("alpha and beta must be finite".into()));
        }
        let modes = enumerate_modes(n, l_max);
        let mut slot_degree = Vec::with_capacity(modes.len() * n_sys);
        for m in &modes {
            slot_degree.extend(std::iter::repeat_n(m.l, n_sys));
        }
        let (wf, wg) = slot_degree.iter().map(|l| sobolev_weights(n, *l, beta)).unzip();
        let projector = if potential.is_radial() { None } else { Some(ProductProjector::new(n, l_max, 2)?) };
        Ok(Self { n, alpha, beta, l_max, n_sys, potential, modes, slot_degree, wf, wg, projector })
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn slots(&self) -> usize {
        self.slot_degree.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.slots()
    }

    pub fn slot_degree(&self, slot: usize) -> usize {
        self.slot_degree[slot]
    }

    pub fn limiting_block(&self, l: usize) -> Matrix2<f64> {
        let a = self.alpha;
        Matrix2::new(a, 1.0, eigenvalue(self.n, l), a + 2.0 - self.n as f64)
    }

    /// Diagonal of the weight map from natural to weighted coordinates.
    pub fn weights(&self) -> Vec<f64> {
        self.wf.iter().chain(&self.wg).copied().collect()
    }

    pub fn to_weighted(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.weights();
        let mut out = z.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= w[i];
        }
        out
    }

    pub fn from_weighted(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let w = self.weights();
        let mut out = y.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row /= w[i];
        }
        out
    }

    /// `H` norm of each column of a natural-coordinate matrix.
    pub fn h_norm(&self, z: &DMatrix<f64>) -> f64 {
        self.to_weighted(z).norm()
    }

    /// `A` in natural coordinates.
    pub fn assemble_a(&self) -> DMatrix<f64> {
        let s = self.slots();
        let mut a = DMatrix::zeros(2 * s, 2 * s);
        for (k, l) in self.slot_degree.iter().enumerate() {
            let b = self.limiting_block(*l);
            a[(k, k)] = b[(0, 0)];
            a[(k, s + k)] = b[(0, 1)];
            a[(s + k, k)] = b[(1, 0)];
            a[(s + k, s + k)] = b[(1, 1)];
        }
        a
    }

    /// Lower-left block `e^{2τ} Π V(e^τ, ·)` of `B(τ)`.
    pub fn coupling(&self, tau: f64) -> Result<Coupling> {
        if self.potential.is_zero() {
            return Ok(Coupling::Zero);
        }
        let t = tau.exp();
        let e2 = (2.0 * tau).exp();
        match &self.projector {
            None => Ok(Coupling::Diagonal(e2 * self.potential.radial_value(t)?)),
            Some(p) => {
                let mut failure = None;
                let g = p.multiplier_matrix(|x| match self.potential.value(t, x) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                });
                match failure {
                    Some(e) => Err(e),
                    None => Ok(Coupling::Dense(g * e2)),
                }
            }
        }
    }

    /// `B(τ)` in natural coordinates.
    pub fn assemble_b(&self, tau: f64) -> Result<DMatrix<f64>> {
        let s = self.slots();
        let mut b = DMatrix::zeros(2 * s, 2 * s);
        match self.coupling(tau)? {
            Coupling::Zero => {}
            Coupling::Diagonal(c) => {
                for k in 0..s {
                    b[(s + k, k)] = c;
                }
            }
            Coupling::Dense(g) => {
                let nn = self.n_sys;
                for i in 0..g.nrows() {
                    for j in 0..g.ncols() {
                        for c in 0..nn {
                            b[(s + i * nn + c, j * nn + c)] = g[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(b)
    }

    /// Operator norm of `B(τ)` on `H`.
    pub fn coupling_norm(&self, tau: f64) -> Result<f64> {
        let b = self.assemble_b(tau)?;
        let w = self.weights();
        let bw = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| w[i] * b[(i, j)] / w[j]);
        Ok(crate::linalg::spectral_norm(&bw))
    }

    /// Generator of the rescaled system in weighted coordinates.
    pub fn weighted_system(&self) -> RsesSystem<'_> {
        RsesSystem { op: self, slots: (0..self.slots()).collect(), weighted: true }
    }

    /// Generator of the rescaled system in natural coordinates.
    pub fn natural_system(&self) -> RsesSystem<'_> {
        RsesSystem { op: self, slots: (0..self.slots()).collect(), weighted: false }
    }

    /// Two-dimensional weighted system of a single slot; exact only for radial potentials.
    pub fn slot_system(&self, slot: usize) -> Result<RsesSystem<'_>> {
        if !self.potential.is_radial() {
            return Err(Error::InvalidArgument("slot systems decouple only for radial potentials".into()));
        }
        Ok(RsesSystem { op: self, slots: vec![slot], weighted: true })
    }

    /// `(A - iμ)^{-1}` in natural coordinates.
    pub fn resolvent_a(&self, mu: f64) -> Result<DMatrix<Complex64>> {
        crate::dichotomy::check_alpha(self.n, self.alpha, crate::dichotomy::DEFAULT_GAP_TOL)?;
        let s = self.slots();
        let mut r = DMatrix::from_element(2 * s, 2 * s, Complex64::new(0.0, 0.0));
        for (k, l) in self.slot_degree.iter().enumerate() {
            let inv = block_resolvent(&self.limiting_block(*l), mu);
            r[(k, k)] = inv[0];
            r[(k, s + k)] = inv[1];
            r[(s + k, k)] = inv[2];
            r[(s + k, s + k)] = inv[3];
        }
        Ok(r)
    }

    /// `‖(A - iμ)^{-1}‖` on `H`, computed blockwise per degree.
    pub fn resolvent_norm(&self, mu: f64) -> Result<f64> {
        crate::dichotomy::check_alpha(self.n, self.alpha, crate::dichotomy::DEFAULT_GAP_TOL)?;
        let mut norm: f64 = 0.0;
        for l in 0..=self.l_max {
            let inv = block_resolvent(&self.limiting_block(l), mu);
            let (wf, wg) = sobolev_weights(self.n, l, self.beta);
            let m = nalgebra::Matrix2::new(inv[0], inv[1] * (wf / wg), inv[2] * (wg / wf), inv[3]);
            norm = norm.max(m.singular_values().max());
        }
        Ok(norm)
    }
}

/// Row-major entries of the inverse of `block - iμ`.
pub(crate) fn block_resolvent(block: &Matrix2<f64>, mu: f64) -> [Complex64; 4] {
    let i = Complex64::new(0.0, mu);
    let a = block[(0, 0)] - i;
    let b = Complex64::new(block[(0, 1)], 0.0);
    let c = Complex64::new(block[(1, 0)], 0.0);
    let d = block[(1, 1)] - i;
    let det = a * d - b * c;
    [d / det, -b / det, -c / det, a / det]
}

/// A restriction of the rescaled system to a set of slots.
#[derive(Debug, Clone)]
pub struct RsesSystem<'a> {
    op: &'a SesOperator,
    slots: Vec<usize>,
    weighted: bool,
}

impl RsesSystem<'_> {
    fn weight_pair(&self, slot: usize) -> (f64, f64) {
        if self.weighted {
            (self.op.wf[slot], self.op.wg[slot])
        } else {
            (1.0, 1.0)
        }
    }
}

impl Generator for RsesSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.slots.len()
    }

    fn apply_exp(&self, s: f64, y: &mut DMatrix<f64>) {
        let half = self.slots.len();
        let mut cache: Vec<Option<Matrix2<f64>>> = vec![None; self.op.l_max + 1];
        for (k, slot) in self.slots.iter().enumerate() {
            let l = self.op.slot_degree[*slot];
            let e = *cache[l].get_or_insert_with(|| block_exponential(self.op.n, self.op.alpha, l, s));
            let (wf, wg) = self.weight_pair(*slot);
            let (e00, e01, e10, e11) = (e[(0, 0)], e[(0, 1)] * wf / wg, e[(1, 0)] * wg / wf, e[(1, 1)]);
            for j in 0..y.ncols() {
                let f = y[(k, j)];
                let g = y[(half + k, j)];
                y[(k, j)] = e00 * f + e01 * g;
                y[(half + k, j)] = e10 * f + e11 * g;
            }
        }
    }

    fn coupling_is_zero(&self) -> bool {
        self.op.potential.is_zero()
    }

    fn apply_coupling(&self, tau: f64, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let half = self.slots.len();
        let mut out = DMatrix::zeros(y.nrows(), y.ncols());
        match self.op.coupling(tau)? {
            Coupling::Zero => {}
            Coupling::Diagonal(c) => {
                for (k, slot) in self.slots.iter().enumerate() {
                    let (wf, wg) = self.weight_pair(*slot);
                    let factor = c * wg / wf;
                    for j in 0..y.ncols() {
                        out[(half + k, j)] = factor * y[(k, j)];
                    }
                }
            }
            Coupling::Dense(g) => {
                let nn = self.op.n_sys;
                if half != self.op.slots() {
                    return Err(Error::InvalidArgument("dense coupling needs the full slot set".into()));
                }
                for c in 0..nn {
                    let idx: Vec<usize> = (0..g.nrows()).map(|m| m * nn + c).collect();
                    let f = DMatrix::from_fn(idx.len(), y.ncols(), |i, j| {
                        let (wf, _) = self.weight_pair(idx[i]);
                        y[(idx[i], j)] / wf
                    });
                    let gf = &g * f;
                    for (i, slot) in idx.iter().enumerate() {
                        let (_, wg) = self.weight_pair(*slot);
                        for j in 0..y.ncols() {
                            out[(half + slot, j)] = wg * gf[(i, j)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_exponential_matches_series() {
        for n in [2usize, 3] {
            for l in 0..4usize {
                let alpha = 0.3;
                let s = 0.7;
                let k = Matrix2::new(alpha, 1.0, eigenvalue(n, l), alpha + 2.0 - n as f64) * s;
                let mut term = Matrix2::identity();
                let mut sum = Matrix2::identity();
                for j in 1..60 {
                    term = term * k / j as f64;
                    sum += term;
                }
                assert!((block_exponential(n, alpha, l, s) - sum).norm() < 1e-12 * sum.norm());
            }
        }
    }

    fn block_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
        let tr = m.trace();
        let det = m.determinant();
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 + disc, tr / 2.0 - disc)
    }

    #[test]
    fn spectrum_of_a() {
        let op = SesOperator::new(3, 0.5, 0.0, 3, 1, PotentialSpec::zero()).unwrap();
        let a = op.assemble_a();
        let s = op.slots();
        for k in 0..s {
            let l = op.slot_degree(k) as f64;
            let block = Matrix2::new(a[(k, k)], a[(k, s + k)], a[(s + k, k)], a[(s + k, s + k)]);
            let (hi, lo) = block_eigenvalues(&block);
            assert!((hi - (0.5 + l)).abs() < 1e-12 && (lo - (-0.5 - l)).abs() < 1e-12);
            for j in 0..2 * s {
                if j != k && j != s + k {
                    assert_eq!(a[(k, j)], 0.0);
                }
            }
        }
        let (hi, lo) = block_eigenvalues(&op.limiting_block(0));
        assert!((hi - 0.5).abs() < 1e-15 && (lo + 0.5).abs() < 1e-15);
        for l in 0..4usize {
            let v = nalgebra::Vector2::new(1.0, l as f64);
            assert!((op.limiting_block(l) * v - v * (0.5 + l as f64)).norm() < 1e-14);
        }
    }

    #[test]
    fn n2_spectrum_is_shifted_integers() {
        let op = SesOperator::new(2, 0.5, 0.0, 3, 1, PotentialSpec::zero()).unwrap();
        for l in 0..=3 {
            let (hi, lo) = block_eigenvalues(&op.limiting_block(l));
            for ev in [hi, lo] {
                let x = ev - 0.5;
                assert!((x - x.round()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coupling_examples() {
        let zero = SesOperator::new(3, 0.5, 0.0, 2, 1, PotentialSpec::zero()).unwrap();
        assert_eq!(zero.assemble_b(-1.0).unwrap().norm(), 0.0);
        let c = SesOperator::new(3, 0.5, 0.0, 2, 1, PotentialSpec::constant(2.0)).unwrap();
        let b = c.assemble_b(0.0).unwrap();
        let s = c.slots();
        for k in 0..s {
            assert_eq!(b[(s + k, k)], 2.0);
        }
        assert_eq!(b.iter().filter(|x| **x != 0.0).count(), s);
    }

    #[test]
    fn resolvent_inverts() {
        let op = SesOperator::new(3, 0.5, 0.0, 3, 1, PotentialSpec::zero()).unwrap();
        let a = op.assemble_a().map(|x| Complex64::new(x, 0.0));
        for mu in [0.0, 1.0, 7.5] {
            let r = op.resolvent_a(mu).unwrap();
            let shifted = &a - DMatrix::identity(a.nrows(), a.ncols()) * Complex64::new(0.0, mu);
            let id = &r * shifted;
            assert!((id - DMatrix::identity(a.nrows(), a.ncols())).norm() < 1e-12);
        }
        let bad = SesOperator::new(3, 1.0, 0.0, 3, 1, PotentialSpec::zero()).unwrap();
        assert!(matches!(bad.resolvent_a(1.0), Err(Error::ForbiddenAlpha { .. })));
    }

    #[test]
    fn a0_resolvent_closed_form() {
        // [[0, 1], [λ, 0]] - iμ has inverse [[iμ d, d], [λ d, iμ d]] with d = 1 / (λ + μ²)
        for l in 0..5usize {
            for mu in [0.5, 3.0] {
                let lam = eigenvalue(3, l);
                let inv = block_resolvent(&Matrix2::new(0.0, 1.0, lam, 0.0), mu);
                let d = 1.0 / (lam + mu * mu);
                let i = Complex64::new(0.0, 1.0);
                let expect = [i * mu * d, Complex64::new(d, 0.0), Complex64::new(lam * d, 0.0), i * mu * d];
                for (a, b) in inv.iter().zip(&expect) {
                    assert!((a - b).norm() < 1e-14);
                }
            }
        }
    }
}
