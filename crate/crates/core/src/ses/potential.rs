use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sphere::{evaluate_basis, mode_count, SphereQuadrature};

type PointFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// User supplied potential `V(t, θ)`.
#[derive(Clone)]
pub struct CustomPotential {
    pub radial: bool,
    /// Declared bound on `sup |V|` over the ball.
    pub bound: f64,
    pub eval: Arc<PointFn>,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential").field("radial", &self.radial).field("bound", &self.bound).finish()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    Zero,
    Constant(f64),
    /// `V(t) = Σ a_k t^k`.
    RadialPolynomial(Vec<f64>),
    /// Piecewise linear in `t`, constant beyond the table ends.
    RadialTable { t: Vec<f64>, v: Vec<f64> },
    /// Real harmonic coefficients of `V(t_j, ·)` at samples `t_j`, linear in `t` between samples.
    SphereExpansion { n: usize, l_max: usize, t: Vec<f64>, coeffs: Vec<Vec<f64>> },
    Custom(CustomPotential),
}

/// A potential together with a constant spectral shift and its declared Hölder exponent.
///
/// The evaluated potential is `V(t, θ) + shift`; eigenvalue problems use `shift = -λ`.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub shift: f64,
    pub holder_exponent: f64,
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::zero()
    }
}

impl PotentialSpec {
    fn from_kind(kind: PotentialKind) -> Self {
        Self { kind, shift: 0.0, holder_exponent: 0.5 }
    }

    pub fn zero() -> Self {
        Self::from_kind(PotentialKind::Zero)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_kind(PotentialKind::Constant(c))
    }

    pub fn radial_polynomial(coeffs: Vec<f64>) -> Self {
        Self::from_kind(PotentialKind::RadialPolynomial(coeffs))
    }

    pub fn radial_table(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != v.len() {
            return Err(Error::InvalidArgument("radial table needs matching, non-empty t and v".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) || t[0] < 0.0 {
            return Err(Error::InvalidArgument("radial table t-samples must be non-negative and increasing".into()));
        }
        Ok(Self::from_kind(PotentialKind::RadialTable { t, v }))
    }

    pub fn sphere_expansion(n: usize, l_max: usize, t: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let m = mode_count(n, l_max);
        if t.is_empty() || t.len() != coeffs.len() || coeffs.iter().any(|c| c.len() != m) {
            return Err(Error::InvalidArgument(format!("sphere expansion needs {m} coefficients per t-sample")));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("expansion t-samples must be increasing".into()));
        }
        Ok(Self::from_kind(PotentialKind::SphereExpansion { n, l_max, t, coeffs }))
    }

    pub fn custom(radial: bool, bound: f64, eval: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::from_kind(PotentialKind::Custom(CustomPotential { radial, bound, eval: Arc::new(eval) }))
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift += shift;
        self
    }

    pub fn with_holder_exponent(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!("Hoelder exponent must lie in (0, 1), got {gamma}")));
        }
        self.holder_exponent = gamma;
        Ok(self)
    }

    pub fn is_radial(&self) -> bool {
        match &self.kind {
            PotentialKind::SphereExpansion { .. } => false,
            PotentialKind::Custom(c) => c.radial,
            _ => true,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.shift == 0.0
            && match &self.kind {
                PotentialKind::Zero => true,
                PotentialKind::Constant(c) => *c == 0.0,
                PotentialKind::RadialPolynomial(a) => a.iter().all(|x| *x == 0.0),
                PotentialKind::RadialTable { v, .. } => v.iter().all(|x| *x == 0.0),
                PotentialKind::SphereExpansion { coeffs, .. } => coeffs.iter().flatten().all(|x| *x == 0.0),
                PotentialKind::Custom(_) => false,
            }
    }

    fn check_t(t: f64) -> Result<()> {
        if t.is_finite() && t > 0.0 {
            Ok(())
        } else {
            Err(Error::NotEvaluable { t, reason: "radius must be positive and finite".into() })
        }
    }

    /// Value of a radial potential at radius `t`.
    pub fn radial_value(&self, t: f64) -> Result<f64> {
        if !self.is_radial() {
            return Err(Error::InvalidArgument("potential is not radial".into()));
        }
        self.value(t, &[0.0, 0.0, 1.0])
    }

    /// `V(t, x) + shift` at the unit vector `x`.
    pub fn value(&self, t: f64, x: &[f64]) -> Result<f64> {
        Self::check_t(t)?;
        let v = match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant(c) => *c,
            PotentialKind::RadialPolynomial(a) => a.iter().rev().fold(0.0, |acc, c| acc * t + c),
            PotentialKind::RadialTable { t: ts, v } => interpolate(ts, t, |i| v[i]),
            PotentialKind::SphereExpansion { n, l_max, t: ts, coeffs } => {
                let basis = evaluate_basis(*n, *l_max, x);
                interpolate(ts, t, |i| coeffs[i].iter().zip(&basis).map(|(c, y)| c * y).sum())
            }
            PotentialKind::Custom(c) => (c.eval)(t, x),
        };
        let v = v + self.shift;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NotEvaluable { t, reason: format!("non-finite value {v}") })
        }
    }

    /// Upper bound for `sup |V + shift|` over radii `t <= t_max`.
    pub fn sup_bound(&self, t_max: f64) -> f64 {
        let s = self.shift.abs();
        match &self.kind {
            PotentialKind::Zero => s,
            PotentialKind::Constant(c) => (c + self.shift).abs(),
            PotentialKind::RadialPolynomial(a) => {
                a.iter().enumerate().map(|(k, c)| c.abs() * t_max.powi(k as i32)).sum::<f64>() + s
            }
            PotentialKind::RadialTable { t, v } => {
                let mut sup = v[0].abs();
                for (ti, vi) in t.iter().zip(v) {
                    if *ti <= t_max {
                        sup = sup.max(vi.abs());
                    }
                }
                sup.max(interpolate(t, t_max, |i| v[i]).abs()) + s
            }
            PotentialKind::SphereExpansion { n, l_max, t, coeffs } => {
                let quad = SphereQuadrature::new(*n, 2 * l_max + 2).expect("dimension validated at construction");
                let mut sup: f64 = 0.0;
                for (ti, c) in t.iter().zip(coeffs) {
                    if *ti > t_max && sup > 0.0 {
                        break;
                    }
                    for node in &quad.nodes {
                        let basis = evaluate_basis(*n, *l_max, node);
                        sup = sup.max(c.iter().zip(&basis).map(|(a, y)| a * y).sum::<f64>().abs());
                    }
                }
                // sampled maximum; inflate to cover values between nodes
                1.5 * sup + s
            }
            PotentialKind::Custom(c) => c.bound + s,
        }
    }
}

fn interpolate(ts: &[f64], t: f64, value: impl Fn(usize) -> f64) -> f64 {
    if t <= ts[0] {
        return value(0);
    }
    let last = ts.len() - 1;
    if t >= ts[last] {
        return value(last);
    }
    let i = ts.partition_point(|x| *x <= t) - 1;
    let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
    (1.0 - w) * value(i) + w * value(i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let v = PotentialSpec::radial_polynomial(vec![1.0, 1.0]);
        assert_eq!(v.radial_value(0.5).unwrap(), 1.5);
        assert_eq!(v.sup_bound(2.0), 3.0);
        let shifted = v.clone().with_shift(-1.5);
        assert_eq!(shifted.radial_value(0.5).unwrap(), 0.0);
        assert!(PotentialSpec::zero().is_zero());
        assert!(!PotentialSpec::constant(0.0).with_shift(2.0).is_zero());
        assert!(v.value(0.0, &[0.0, 0.0, 1.0]).is_err());
        let table = PotentialSpec::radial_table(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(table.radial_value(0.25).unwrap(), 0.5);
        assert_eq!(table.radial_value(3.0).unwrap(), 2.0);
        assert!(PotentialSpec::radial_table(vec![1.0, 0.5], vec![0.0, 0.0]).is_err());
        assert!(PotentialSpec::zero().with_holder_exponent(1.5).is_err());
    }

    #[test]
    fn expansion_matches_basis() {
        let mut c = vec![0.0; 4];
        c[2] = 2.0;
        let v = PotentialSpec::sphere_expansion(3, 1, vec![1.0], vec![c]).unwrap();
        assert!(!v.is_radial());
        let y10 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((v.value(0.5, &[0.0, 0.0, 1.0]).unwrap() - 2.0 * y10).abs() < 1e-14);
        assert!(v.sup_bound(1.0) >= 2.0 * y10);
    }
}
