//! Real orthonormal harmonics and tensor-product quadrature on `S^1` and `S^2`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::modes::{check_dimension, enumerate_modes, ModeIndex};
use crate::error::Result;

/// Fully normalized associated Legendre values `N_lm P_l^m(x)` for
/// `0 <= m <= l <= l_max` (no Condon–Shortley phase), normalized so that
/// `∫ |N_lm P_l^m(cos θ) e^{imφ}|² dΩ = 1`. Indexed `[l][m]`.
pub(crate) fn normalized_legendre(l_max: usize, x: f64) -> Vec<Vec<f64>> {
    let mut p = vec![Vec::new(); l_max + 1];
    for (l, row) in p.iter_mut().enumerate() {
        *row = vec![0.0; l + 1];
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let k = m as f64;
            pmm *= ((2.0 * k + 1.0) / (2.0 * k)).sqrt() * s;
        }
        p[m][m] = pmm;
        if m < l_max {
            p[m + 1][m] = x * (2.0 * m as f64 + 3.0).sqrt() * pmm;
        }
        for l in m + 2..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }
    p
}

/// Values of every basis function in `modes` at the unit vector `point`.
pub fn evaluate_basis(n: usize, l_max: usize, point: &[f64]) -> Vec<f64> {
    let modes = enumerate_modes(n, l_max);
    let mut out = vec![0.0; modes.len()];
    evaluate_basis_into(n, l_max, &modes, point, &mut out);
    out
}

pub(crate) fn evaluate_basis_into(n: usize, l_max: usize, modes: &[ModeIndex], point: &[f64], out: &mut [f64]) {
    if n == 2 {
        let theta = point[1].atan2(point[0]);
        for (slot, mode) in out.iter_mut().zip(modes) {
            let l = mode.l as f64;
            *slot = match mode.m {
                0 => 1.0 / (2.0 * PI).sqrt(),
                1 => (l * theta).cos() / PI.sqrt(),
                _ => (l * theta).sin() / PI.sqrt(),
            };
        }
        return;
    }
    let z = point[2].clamp(-1.0, 1.0);
    let phi = point[1].atan2(point[0]);
    let p = normalized_legendre(l_max, z);
    let sqrt2 = std::f64::consts::SQRT_2;
    for (slot, mode) in out.iter_mut().zip(modes) {
        let am = mode.m.unsigned_abs() as usize;
        *slot = if mode.m == 0 {
            p[mode.l][0]
        } else if mode.m > 0 {
            sqrt2 * p[mode.l][am] * (am as f64 * phi).cos()
        } else {
            sqrt2 * p[mode.l][am] * (am as f64 * phi).sin()
        };
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

/// Tensor-product rule exact for polynomials of total degree `<= degree`
/// on the sphere (Gauss–Legendre in `cos θ`, trapezoid in azimuth).
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub n: usize,
    pub degree: usize,
    /// Unit vectors, `n` coordinates per node.
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        check_dimension(n)?;
        let n_az = degree + 1;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        if n == 2 {
            for j in 0..n_az {
                let th = 2.0 * PI * j as f64 / n_az as f64;
                nodes.push(vec![th.cos(), th.sin()]);
                weights.push(2.0 * PI / n_az as f64);
            }
        } else {
            let (zs, ws) = gauss_legendre(degree / 2 + 1);
            for (z, w) in zs.iter().zip(&ws) {
                let s = (1.0 - z * z).sqrt();
                for j in 0..n_az {
                    let ph = 2.0 * PI * j as f64 / n_az as f64;
                    nodes.push(vec![s * ph.cos(), s * ph.sin(), *z]);
                    weights.push(w * 2.0 * PI / n_az as f64);
                }
            }
        }
        Ok(Self { n, degree, nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Basis values at the nodes as a `nodes × modes` matrix.
    pub fn basis_table(&self, l_max: usize) -> DMatrix<f64> {
        let modes = enumerate_modes(self.n, l_max);
        let mut table = DMatrix::zeros(self.len(), modes.len());
        let mut row = vec![0.0; modes.len()];
        for (q, node) in self.nodes.iter().enumerate() {
            evaluate_basis_into(self.n, l_max, &modes, node, &mut row);
            for (k, v) in row.iter().enumerate() {
                table[(q, k)] = *v;
            }
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        for p in 0..10 {
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - exact).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        for n in [2, 3] {
            let l_max = 6;
            let quad = SphereQuadrature::new(n, 2 * l_max).unwrap();
            let table = quad.basis_table(l_max);
            let m = table.ncols();
            for i in 0..m {
                for j in 0..m {
                    let s: f64 = (0..quad.len()).map(|q| quad.weights[q] * table[(q, i)] * table[(q, j)]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s - expect).abs() < 1e-12, "n={n} i={i} j={j} s={s}");
                }
            }
        }
    }

    #[test]
    fn y10_closed_form() {
        let v = evaluate_basis(3, 1, &[0.0, 0.6, 0.8]);
        // ordering (0,0), (1,-1), (1,0), (1,1)
        assert!((v[2] - (3.0 / (4.0 * PI)).sqrt() * 0.8).abs() < 1e-15);
        assert!((v[0] - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
    }
}
