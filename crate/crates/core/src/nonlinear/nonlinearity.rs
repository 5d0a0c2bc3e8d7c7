use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ses::PotentialSpec;
use crate::sphere::{ProductProjector, SphereField};

/// `(t, x, u) ↦ F` with `x` a unit vector.
pub type PointNonlinearity = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// Pointwise nonlinearity `F(t, θ, u) = Σ c_p u^p + h(t, θ) + G(t, θ, u)`.
#[derive(Clone)]
pub struct Nonlinearity {
    pub terms: Vec<(f64, u32)>,
    pub forcing: Option<PotentialSpec>,
    pub custom: Option<Arc<PointNonlinearity>>,
    /// Largest `|u|` at which `F` may be evaluated.
    pub validity_bound: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("terms", &self.terms)
            .field("forcing", &self.forcing)
            .field("custom", &self.custom.is_some())
            .field("validity_bound", &self.validity_bound)
            .finish()
    }
}

impl Default for Nonlinearity {
    fn default() -> Self {
        Self::zero()
    }
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Self { terms: Vec::new(), forcing: None, custom: None, validity_bound: f64::INFINITY }
    }

    pub fn polynomial(terms: Vec<(f64, u32)>) -> Self {
        Self { terms, ..Self::zero() }
    }

    pub fn custom(f: impl Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { custom: Some(Arc::new(f)), ..Self::zero() }
    }

    pub fn with_forcing(mut self, forcing: PotentialSpec) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_validity_bound(mut self, bound: f64) -> Self {
        self.validity_bound = bound;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|(c, _)| *c == 0.0)
            && self.forcing.as_ref().is_none_or(PotentialSpec::is_zero)
            && self.custom.is_none()
    }

    /// True when `F(x, 0) ≠ 0` is possible.
    pub fn has_forcing(&self) -> bool {
        self.forcing.as_ref().is_some_and(|h| !h.is_zero()) || self.terms.iter().any(|(c, p)| *p == 0 && *c != 0.0)
    }

    pub fn is_radial(&self) -> bool {
        self.custom.is_none() && self.forcing.as_ref().is_none_or(PotentialSpec::is_radial)
    }

    pub fn value(&self, t: f64, x: &[f64], u: f64) -> Result<f64> {
        if u.abs() > self.validity_bound || !u.is_finite() {
            return Err(Error::Overflow { value: u, bound: self.validity_bound });
        }
        let mut out: f64 = self.terms.iter().map(|(c, p)| c * u.powi(*p as i32)).sum();
        if let Some(h) = &self.forcing {
            out += h.value(t, x)?;
        }
        if let Some(g) = &self.custom {
            out += g(t, x, u);
        }
        Ok(out)
    }
}

/// Quadrature-based evaluator of the rescaled source `e^{(α+2)τ} F(e^τ, θ, e^{-ατ} f̃)`.
#[derive(Debug, Clone)]
pub struct NonlinearEvaluator {
    pub nonlinearity: Nonlinearity,
    projector: ProductProjector,
}

impl NonlinearEvaluator {
    pub fn new(nonlinearity: Nonlinearity, n: usize, l_max: usize) -> Result<Self> {
        let extra = 2 * l_max + 2 + 2 * nonlinearity.terms.iter().map(|(_, p)| *p as usize).max().unwrap_or(0);
        Ok(Self { nonlinearity, projector: ProductProjector::new(n, l_max, extra)? })
    }

    pub fn n(&self) -> usize {
        self.projector.n
    }

    pub fn l_max(&self) -> usize {
        self.projector.l_max
    }

    pub fn evaluate(&self, tau: f64, f: &SphereField, alpha: f64) -> Result<SphereField> {
        if f.n != self.projector.n || f.l_max != self.projector.l_max || f.n_sys != 1 {
            return Err(Error::DimensionMismatch("nonlinearity acts on scalar fields of the projector basis".into()));
        }
        let mut out = SphereField::zeros(f.n, f.l_max, 1);
        if self.nonlinearity.is_zero() {
            return Ok(out);
        }
        let t = tau.exp();
        let unscale = (-alpha * tau).exp();
        let prefactor = ((alpha + 2.0) * tau).exp();
        let coeffs: Vec<f64> = f.coeffs.iter().map(|c| c.re * unscale).collect();
        let nodes = &self.projector.quadrature.nodes;
        let mut values = vec![0.0; nodes.len()];
        self.projector.synthesize_real(&coeffs, &mut values);
        for (v, x) in values.iter_mut().zip(nodes) {
            *v = prefactor * self.nonlinearity.value(t, x, *v)?;
        }
        let mut proj = vec![0.0; coeffs.len()];
        self.projector.analyze_real(&values, &mut proj);
        for (c, p) in out.coeffs.iter_mut().zip(proj) {
            c.re = p;
        }
        Ok(out)
    }
}

/// One-shot form of [`NonlinearEvaluator::evaluate`].
pub fn evaluate_nonlinearity(nonlinearity: &Nonlinearity, tau: f64, f: &SphereField, alpha: f64) -> Result<SphereField> {
    NonlinearEvaluator::new(nonlinearity.clone(), f.n, f.l_max)?.evaluate(tau, f, alpha)
}
