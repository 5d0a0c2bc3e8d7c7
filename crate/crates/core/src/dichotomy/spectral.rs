use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::alpha::{check_alpha, DEFAULT_GAP_TOL};
use crate::error::{Error, Result};
use crate::linalg::mgs_qr;
use crate::ses::{sobolev_weights, PotentialSpec, RescaledState, SesOperator};
use crate::sphere::SphereField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Flavor {
    Unstable,
    Stable,
}

/// Orthonormal frame (weighted coordinates) spanning a dichotomy subspace at `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceFrame {
    pub tau: f64,
    pub flavor: Flavor,
    pub vectors: DMatrix<f64>,
}

impl SubspaceFrame {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Frame vectors as rescaled states (natural coordinates).
    pub fn states(&self, op: &SesOperator) -> Vec<RescaledState> {
        let template = SphereField::zeros(op.n, op.l_max, op.n_sys);
        let natural = op.from_weighted(&self.vectors);
        (0..natural.ncols())
            .map(|j| {
                let col = natural.columns(j, 1).into_owned();
                RescaledState::from_columns(self.tau, op.alpha, &template, &col)
            })
            .collect()
    }
}

/// Eigen-directions of one limiting block in weighted coordinates, split by sign
/// of the eigenvalue. Returns `(unstable, unstable rates, stable, stable rates)`.
pub(crate) fn slot_spectral_frames(
    n: usize,
    alpha: f64,
    beta: f64,
    l: usize,
) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>, Vec<f64>) {
    let (wf, wg) = sobolev_weights(n, l, beta);
    let nu1 = l as f64;
    let nu2 = 2.0 - n as f64 - l as f64;
    let candidates: Vec<(f64, [f64; 2])> = if nu1 == nu2 {
        vec![(alpha, [1.0, 0.0]), (alpha, [0.0, 1.0])]
    } else {
        vec![(alpha + nu1, [wf, wg * nu1]), (alpha + nu2, [wf, wg * nu2])]
    };
    let mut parts = [(Vec::new(), Vec::new()), (Vec::new(), Vec::new())];
    for (rate, v) in candidates {
        let side = usize::from(rate < 0.0);
        parts[side].0.extend_from_slice(&v);
        parts[side].1.push(rate);
    }
    let build = |cols: &[f64]| {
        let m = DMatrix::from_column_slice(2, cols.len() / 2, cols);
        mgs_qr(&m).0
    };
    let [(u, ru), (s, rs)] = parts;
    (build(&u), ru, build(&s), rs)
}

/// Embed per-slot `2 × k` blocks into full weighted coordinates, slots in order.
pub(crate) fn embed_slot_blocks(slots: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(2 * slots, cols);
    let mut c = 0;
    for (s, b) in blocks.iter().enumerate() {
        for j in 0..b.ncols() {
            out[(s, c)] = b[(0, j)];
            out[(slots + s, c)] = b[(1, j)];
            c += 1;
        }
    }
    out
}

/// Spectral frames of `A` (the dichotomy at `τ = -∞`), with per-column rates.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub unstable: SubspaceFrame,
    pub stable: SubspaceFrame,
    pub unstable_rates: Vec<f64>,
    pub stable_rates: Vec<f64>,
}

pub fn spectral_projections_a(n: usize, alpha: f64, beta: f64, l_max: usize, n_sys: usize) -> Result<SpectralSplit> {
    check_alpha(n, alpha, DEFAULT_GAP_TOL)?;
    let op = SesOperator::new(n, alpha, beta, l_max, n_sys, PotentialSpec::zero())?;
    let per_degree: Vec<_> = (0..=l_max).map(|l| slot_spectral_frames(n, alpha, beta, l)).collect();
    let slots = op.slots();
    let degrees: Vec<usize> = (0..slots).map(|s| op.slot_degree(s)).collect();
    let us: Vec<&DMatrix<f64>> = degrees.iter().map(|l| &per_degree[*l].0).collect();
    let ss: Vec<&DMatrix<f64>> = degrees.iter().map(|l| &per_degree[*l].2).collect();
    let unstable_rates = degrees.iter().flat_map(|l| per_degree[*l].1.clone()).collect();
    let stable_rates = degrees.iter().flat_map(|l| per_degree[*l].3.clone()).collect();
    Ok(SpectralSplit {
        unstable: SubspaceFrame { tau: f64::NEG_INFINITY, flavor: Flavor::Unstable, vectors: embed_slot_blocks(slots, &us) },
        stable: SubspaceFrame { tau: f64::NEG_INFINITY, flavor: Flavor::Stable, vectors: embed_slot_blocks(slots, &ss) },
        unstable_rates,
        stable_rates,
    })
}

fn require_n3(z: &RescaledState) -> Result<()> {
    if z.f.n != 3 {
        return Err(Error::InvalidArgument("closed-form dichotomy is available for n = 3".into()));
    }
    Ok(())
}

/// Explicit dichotomy projections for `V = 0`, `n = 3`.
pub fn closed_form_projection(z: &RescaledState, flavor: Flavor) -> Result<RescaledState> {
    require_n3(z)?;
    let mut out = z.clone();
    let lams = z.f.slot_eigenvalues();
    for (k, lam) in lams.iter().enumerate() {
        let l = ((1.0 + 4.0 * lam).sqrt() - 1.0) / 2.0;
        let l = l.round();
        let (z1, z2) = (z.f.coeffs[k], z.g.coeffs[k]);
        let denom = 2.0 * l + 1.0;
        match flavor {
            Flavor::Unstable => {
                let c = (z1 * (l + 1.0) + z2) / denom;
                out.f.coeffs[k] = c;
                out.g.coeffs[k] = c * l;
            }
            Flavor::Stable => {
                let c = (z1 * l - z2) / denom;
                out.f.coeffs[k] = c;
                out.g.coeffs[k] = -c * (l + 1.0);
            }
        }
    }
    Ok(out)
}

/// Explicit evolutions `Φ^u(τ, τ₀)` (`τ <= τ₀`) and `Φ^s(τ, τ₀)` (`τ >= τ₀`) for `V = 0`, `n = 3`.
pub fn closed_form_evolution(z: &RescaledState, tau: f64, tau0: f64, flavor: Flavor) -> Result<RescaledState> {
    match flavor {
        Flavor::Unstable if tau > tau0 => {
            return Err(Error::TimeOrdering(format!("unstable evolution needs tau <= tau0, got {tau} > {tau0}")))
        }
        Flavor::Stable if tau < tau0 => {
            return Err(Error::TimeOrdering(format!("stable evolution needs tau >= tau0, got {tau} < {tau0}")))
        }
        _ => {}
    }
    let mut out = closed_form_projection(z, flavor)?;
    out.tau = tau;
    let lams = z.f.slot_eigenvalues();
    for (k, lam) in lams.iter().enumerate() {
        let l = (((1.0 + 4.0 * lam).sqrt() - 1.0) / 2.0).round();
        let rate = match flavor {
            Flavor::Unstable => z.alpha + l,
            Flavor::Stable => z.alpha - l - 1.0,
        };
        let factor = (rate * (tau - tau0)).exp();
        out.f.coeffs[k] *= factor;
        out.g.coeffs[k] *= factor;
    }
    Ok(out)
}
