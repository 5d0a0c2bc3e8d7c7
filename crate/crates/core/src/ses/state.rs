use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereField;

/// Dirichlet and Neumann data `(u(t, ·), ∂_r u(t, ·))` on the sphere of radius `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceState {
    pub t: f64,
    pub f: SphereField,
    pub g: SphereField,
}

/// Trace data after the change of variables `t = e^τ`, `f̃ = t^α f`, `g̃ = t^{1+α} g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledState {
    pub tau: f64,
    pub alpha: f64,
    pub f: SphereField,
    pub g: SphereField,
}

fn check_pair(f: &SphereField, g: &SphereField) -> Result<()> {
    f.check_shape(g)
}

/// Stack `(f, g)` into real coordinates: one column for real parts, one for imaginary parts.
pub(crate) fn pair_to_columns(f: &SphereField, g: &SphereField) -> DMatrix<f64> {
    let s = f.coeffs.len();
    let mut out = DMatrix::zeros(2 * s, 2);
    for (k, c) in f.coeffs.iter().enumerate() {
        out[(k, 0)] = c.re;
        out[(k, 1)] = c.im;
    }
    for (k, c) in g.coeffs.iter().enumerate() {
        out[(s + k, 0)] = c.re;
        out[(s + k, 1)] = c.im;
    }
    out
}

pub(crate) fn columns_to_pair(template: &SphereField, cols: &DMatrix<f64>) -> (SphereField, SphereField) {
    let s = template.coeffs.len();
    let mut f = template.clone();
    let mut g = template.clone();
    for k in 0..s {
        let im = if cols.ncols() > 1 { cols[(k, 1)] } else { 0.0 };
        let img = if cols.ncols() > 1 { cols[(s + k, 1)] } else { 0.0 };
        f.coeffs[k] = Complex64::new(cols[(k, 0)], im);
        g.coeffs[k] = Complex64::new(cols[(s + k, 0)], img);
    }
    (f, g)
}

impl TraceState {
    pub fn new(t: f64, f: SphereField, g: SphereField) -> Result<Self> {
        check_pair(&f, &g)?;
        Ok(Self { t, f, g })
    }

    pub fn zeros(t: f64, n: usize, l_max: usize, n_sys: usize) -> Self {
        let z = SphereField::zeros(n, l_max, n_sys);
        Self { t, f: z.clone(), g: z }
    }

    pub fn to_columns(&self) -> DMatrix<f64> {
        pair_to_columns(&self.f, &self.g)
    }

    pub fn from_columns(t: f64, template: &SphereField, cols: &DMatrix<f64>) -> Self {
        let (f, g) = columns_to_pair(template, cols);
        Self { t, f, g }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { t: self.t, f: self.f.scaled(s), g: self.g.scaled(s) }
    }
}

impl RescaledState {
    pub fn new(tau: f64, alpha: f64, f: SphereField, g: SphereField) -> Result<Self> {
        check_pair(&f, &g)?;
        Ok(Self { tau, alpha, f, g })
    }

    pub fn zeros(tau: f64, alpha: f64, n: usize, l_max: usize, n_sys: usize) -> Self {
        let z = SphereField::zeros(n, l_max, n_sys);
        Self { tau, alpha, f: z.clone(), g: z }
    }

    pub fn to_columns(&self) -> DMatrix<f64> {
        pair_to_columns(&self.f, &self.g)
    }

    pub fn from_columns(tau: f64, alpha: f64, template: &SphereField, cols: &DMatrix<f64>) -> Self {
        let (f, g) = columns_to_pair(template, cols);
        Self { tau, alpha, f, g }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self { tau: self.tau, alpha: self.alpha, f: self.f.add(&other.f)?, g: self.g.add(&other.g)? })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self { tau: self.tau, alpha: self.alpha, f: self.f.sub(&other.f)?, g: self.g.sub(&other.g)? })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { tau: self.tau, alpha: self.alpha, f: self.f.scaled(s), g: self.g.scaled(s) }
    }

    /// Largest coefficient modulus over both components.
    pub fn max_abs(&self) -> f64 {
        self.f.coeffs.iter().chain(&self.g.coeffs).map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn check_radius(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("radius must be positive, got t = {t}")))
    }
}

pub fn rescale_forward(x: &TraceState, alpha: f64) -> Result<RescaledState> {
    check_radius(x.t)?;
    let t = x.t;
    Ok(RescaledState { tau: t.ln(), alpha, f: x.f.scaled(t.powf(alpha)), g: x.g.scaled(t.powf(1.0 + alpha)) })
}

pub fn rescale_inverse(x: &RescaledState) -> TraceState {
    let t = x.tau.exp();
    TraceState { t, f: x.f.scaled(t.powf(-x.alpha)), g: x.g.scaled(t.powf(-1.0 - x.alpha)) }
}

/// `(f, g) ↦ (-t^{n-1-α} g, t^{n-2-α} f)`, the trace pair of the adjoint system.
pub fn adjoint_transform(x: &TraceState, alpha: f64) -> Result<RescaledState> {
    check_radius(x.t)?;
    let t = x.t;
    let n = x.f.n as f64;
    Ok(RescaledState {
        tau: t.ln(),
        alpha,
        f: x.g.scaled(-t.powf(n - 1.0 - alpha)),
        g: x.f.scaled(t.powf(n - 2.0 - alpha)),
    })
}

/// Green pairing `t^{n-1} (⟨f_x, g_y⟩ - ⟨g_x, f_y⟩)`.
pub fn wronskian(x: &TraceState, y: &TraceState) -> Result<Complex64> {
    if (x.t - y.t).abs() > 1e-14 * x.t.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("wronskian needs equal radii, got {} and {}", x.t, y.t)));
    }
    let n = x.f.n as f64;
    let a = x.f.dot(&y.g)?;
    let b = x.g.dot(&y.f)?;
    Ok((a - b) * x.t.powf(n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::ModeIndex;

    fn y(l: usize, m: i64) -> SphereField {
        SphereField::mode(3, 2, ModeIndex::new(l, m), 1.0).unwrap()
    }

    #[test]
    fn rescaling_examples() {
        let x = TraceState::new(1.0, y(1, 0), y(2, 1)).unwrap();
        let r = rescale_forward(&x, 0.7).unwrap();
        assert_eq!(r.tau, 0.0);
        assert_eq!(r.f, x.f);
        let x = TraceState::new((-1f64).exp(), y(0, 0), SphereField::zeros(3, 2, 1)).unwrap();
        let r = rescale_forward(&x, 0.5).unwrap();
        assert!((r.f.coeffs[0].re - (-0.5f64).exp()).abs() < 1e-15);
        assert!(rescale_forward(&TraceState::zeros(0.0, 3, 2, 1), 0.5).is_err());
    }

    #[test]
    fn adjoint_at_unit_radius() {
        let x = TraceState::new(1.0, y(1, 0), y(2, 0)).unwrap();
        let a = adjoint_transform(&x, 0.3).unwrap();
        assert_eq!(a.f, y(2, 0).scaled(-1.0));
        assert_eq!(a.g, y(1, 0));
        let z = adjoint_transform(&TraceState::zeros(2.0, 3, 2, 1), 0.3).unwrap();
        assert_eq!(z.max_abs(), 0.0);
    }

    #[test]
    fn wronskian_of_harmonic_pair() {
        for l in 0..3usize {
            for t in [0.3, 1.0, 2.5] {
                let lf = l as f64;
                let plus = TraceState::new(t, y(l, 0).scaled(t.powf(lf)), y(l, 0).scaled(lf * t.powf(lf - 1.0))).unwrap();
                let minus = TraceState::new(
                    t,
                    y(l, 0).scaled(t.powf(-lf - 1.0)),
                    y(l, 0).scaled(-(lf + 1.0) * t.powf(-lf - 2.0)),
                )
                .unwrap();
                let w = wronskian(&plus, &minus).unwrap();
                assert!((w.re + (2.0 * lf + 1.0)).abs() < 1e-12);
                assert_eq!(wronskian(&plus, &plus).unwrap().norm(), 0.0);
            }
        }
    }
}
