use super::potential::PotentialSpec;
use super::state::{RescaledState, TraceState};
use crate::error::{Error, Result};
use crate::sphere::{sobolev_norm, ProductProjector, SphereField};

/// Multiplication by `V(t, ·)` followed by projection onto the truncated basis.
#[derive(Debug, Clone)]
pub struct PotentialAction {
    potential: PotentialSpec,
    projector: Option<ProductProjector>,
}

impl PotentialAction {
    pub fn new(potential: &PotentialSpec, n: usize, l_max: usize) -> Result<Self> {
        let projector = if potential.is_radial() { None } else { Some(ProductProjector::new(n, l_max, 2)?) };
        Ok(Self { potential: potential.clone(), projector })
    }

    pub fn apply(&self, t: f64, f: &SphereField) -> Result<SphereField> {
        match &self.projector {
            None => Ok(f.scaled(self.potential.radial_value(t)?)),
            Some(p) => {
                let mut failure = None;
                let out = p.project(
                    |x| match self.potential.value(t, x) {
                        Ok(v) => v,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                    f,
                )?;
                failure.map_or(Ok(out), Err)
            }
        }
    }
}

fn h_norm(f: &SphereField, g: &SphereField) -> f64 {
    (sobolev_norm(f, 0.5).powi(2) + sobolev_norm(g, -0.5).powi(2)).sqrt()
}

fn laplace_scaled(f: &SphereField, factor: f64) -> SphereField {
    let mut out = f.clone();
    for (c, lam) in out.coeffs.iter_mut().zip(f.slot_eigenvalues()) {
        *c *= lam * factor;
    }
    out
}

/// Max over interior samples of the `H` norm of `x' - rhs(x)`, divided by
/// the largest `H` norm along the trajectory.
fn fd_residual(
    times: &[f64],
    states: &[(SphereField, SphereField)],
    rhs: impl Fn(usize) -> Result<(SphereField, SphereField)>,
) -> Result<f64> {
    if times.len() < 3 {
        return Err(Error::InvalidArgument("residual needs at least 3 samples".into()));
    }
    let scale = states.iter().map(|(f, g)| h_norm(f, g)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for i in 1..times.len() - 1 {
        let h1 = times[i] - times[i - 1];
        let h2 = times[i + 1] - times[i];
        if h1 <= 0.0 || h2 <= 0.0 {
            return Err(Error::InvalidArgument("trajectory samples must be strictly increasing".into()));
        }
        let cm = -h2 / (h1 * (h1 + h2));
        let c0 = (h2 - h1) / (h1 * h2);
        let cp = h1 / (h2 * (h1 + h2));
        let deriv = |k: usize| -> Result<SphereField> {
            let pick = |j: usize| if k == 0 { &states[j].0 } else { &states[j].1 };
            pick(i - 1).scaled(cm).add(&pick(i).scaled(c0))?.add(&pick(i + 1).scaled(cp))
        };
        let (rf, rg) = rhs(i)?;
        let df = deriv(0)?.sub(&rf)?;
        let dg = deriv(1)?.sub(&rg)?;
        worst = worst.max(h_norm(&df, &dg));
    }
    Ok(worst / scale)
}

/// Relative finite-difference residual of trace data against the trace system.
pub fn ses_residual(trajectory: &[TraceState], potential: &PotentialSpec) -> Result<f64> {
    ses_residual_with_source(trajectory, potential, |_| Ok(None))
}

/// As [`ses_residual`], with an extra projected source term added to `g'`.
pub fn ses_residual_with_source(
    trajectory: &[TraceState],
    potential: &PotentialSpec,
    source: impl Fn(&TraceState) -> Result<Option<SphereField>>,
) -> Result<f64> {
    let first = trajectory.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let n = first.f.n as f64;
    let action = PotentialAction::new(potential, first.f.n, first.f.l_max)?;
    let times: Vec<f64> = trajectory.iter().map(|x| x.t).collect();
    let states: Vec<_> = trajectory.iter().map(|x| (x.f.clone(), x.g.clone())).collect();
    fd_residual(&times, &states, |i| {
        let x = &trajectory[i];
        let t = x.t;
        let mut g = action.apply(t, &x.f)?.add(&laplace_scaled(&x.f, 1.0 / (t * t)))?.sub(&x.g.scaled((n - 1.0) / t))?;
        if let Some(s) = source(x)? {
            g = g.add(&s)?;
        }
        Ok((x.g.clone(), g))
    })
}

/// Relative finite-difference residual of rescaled data against `h' = (A + B(τ)) h`.
pub fn rses_residual(trajectory: &[RescaledState], potential: &PotentialSpec) -> Result<f64> {
    rses_residual_with_source(trajectory, potential, |_| Ok(None))
}

/// As [`rses_residual`], with an extra projected source term added to `g̃'`.
pub fn rses_residual_with_source(
    trajectory: &[RescaledState],
    potential: &PotentialSpec,
    source: impl Fn(&RescaledState) -> Result<Option<SphereField>>,
) -> Result<f64> {
    let first = trajectory.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let n = first.f.n as f64;
    let action = PotentialAction::new(potential, first.f.n, first.f.l_max)?;
    let times: Vec<f64> = trajectory.iter().map(|x| x.tau).collect();
    let states: Vec<_> = trajectory.iter().map(|x| (x.f.clone(), x.g.clone())).collect();
    fd_residual(&times, &states, |i| {
        let x = &trajectory[i];
        let a = x.alpha;
        let f = x.f.scaled(a).add(&x.g)?;
        let vf = action.apply(x.tau.exp(), &x.f)?.scaled((2.0 * x.tau).exp());
        let mut g = laplace_scaled(&x.f, 1.0).add(&x.g.scaled(a + 2.0 - n))?.add(&vf)?;
        if let Some(s) = source(x)? {
            g = g.add(&s)?;
        }
        Ok((f, g))
    })
}

/// Relative finite-difference residual against the adjoint rescaled system
/// `p' = -α p + (Δ - e^{2τ} V) q`, `q' = -p + (n - 2 - α) q`.
pub fn adjoint_residual(trajectory: &[RescaledState], potential: &PotentialSpec) -> Result<f64> {
    let first = trajectory.first().ok_or_else(|| Error::InvalidArgument("empty trajectory".into()))?;
    let n = first.f.n as f64;
    let action = PotentialAction::new(potential, first.f.n, first.f.l_max)?;
    let times: Vec<f64> = trajectory.iter().map(|x| x.tau).collect();
    let states: Vec<_> = trajectory.iter().map(|x| (x.f.clone(), x.g.clone())).collect();
    fd_residual(&times, &states, |i| {
        let x = &trajectory[i];
        let a = x.alpha;
        let vq = action.apply(x.tau.exp(), &x.g)?.scaled((2.0 * x.tau).exp());
        let p = x.f.scaled(-a).sub(&laplace_scaled(&x.g, 1.0))?.sub(&vq)?;
        let q = x.f.scaled(-1.0).add(&x.g.scaled(n - 2.0 - a))?;
        Ok((p, q))
    })
}

/// Heuristic check of the admissibility growth condition: whether
/// `t^p ‖f‖ + t^{n-p-1} ‖g‖` stays bounded as `t` decreases along the
/// samples for some `p ∈ (0, n/2)`. Returns the smallest such `p` found on a
/// uniform scan, if any.
pub fn growth_condition_flag(trajectory: &[TraceState]) -> Option<f64> {
    let n = trajectory.first()?.f.n as f64;
    let mut sorted: Vec<&TraceState> = trajectory.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let tail = &sorted[..sorted.len().div_ceil(4).max(2).min(sorted.len())];
    (1..50).map(|k| k as f64 * n / 100.0).find(|p| {
        let vals: Vec<f64> =
            tail.iter().map(|x| x.t.powf(*p) * x.f.l2_norm() + x.t.powf(n - p - 1.0) * x.g.l2_norm()).collect();
        let inner = vals[0];
        let outer = vals[vals.len() - 1];
        vals.iter().all(|v| v.is_finite()) && inner <= 10.0 * outer.max(1e-300)
    })
}
