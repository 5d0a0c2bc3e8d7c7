//! Exponential (Lawson) Dormand–Prince 5(4) integrator for `y' = (A + B(τ)) y`
//! with block-diagonal `A` integrated exactly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_condition, mgs_qr};

/// A linear system split into an exactly integrable part and a coupling.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    /// `y ← exp(s A) y`.
    fn apply_exp(&self, s: f64, y: &mut DMatrix<f64>);
    fn coupling_is_zero(&self) -> bool;
    /// `B(τ) y`.
    fn apply_coupling(&self, tau: f64, y: &DMatrix<f64>) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, h_init: 0.05, h_max: 0.5, h_min: 1e-10, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

impl std::ops::AddAssign for StepStats {
    fn add_assign(&mut self, o: Self) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const BHAT: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Interaction-picture stage `exp(-s A) B(τ + s) exp(s A) z`.
fn stage<G: Generator + ?Sized>(gen: &G, tau: f64, s: f64, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s == 0.0 {
        return gen.apply_coupling(tau, z);
    }
    let mut w = z.clone();
    gen.apply_exp(s, &mut w);
    let mut k = gen.apply_coupling(tau + s, &w)?;
    gen.apply_exp(-s, &mut k);
    Ok(k)
}

fn column_error(delta: &DMatrix<f64>, y0: &DMatrix<f64>, y1: &DMatrix<f64>, opts: &IntegratorOptions) -> f64 {
    let mut err: f64 = 0.0;
    for j in 0..delta.ncols() {
        let scale = opts.atol + opts.rtol * y0.column(j).norm().max(y1.column(j).norm());
        err = err.max(delta.column(j).norm() / scale);
    }
    err
}

/// Advance every column of `y` from `tau0` to `tau1` (either direction).
pub fn integrate<G: Generator + ?Sized>(
    gen: &G,
    y: &mut DMatrix<f64>,
    tau0: f64,
    tau1: f64,
    opts: &IntegratorOptions,
) -> Result<StepStats> {
    let mut stats = StepStats::default();
    if tau1 == tau0 {
        return Ok(stats);
    }
    if gen.coupling_is_zero() {
        gen.apply_exp(tau1 - tau0, y);
        stats.accepted = 1;
        return Ok(stats);
    }
    let dir = (tau1 - tau0).signum();
    let mut tau = tau0;
    let mut h = opts.h_init.min(opts.h_max).min((tau1 - tau0).abs());
    let mut k: Vec<DMatrix<f64>> = Vec::with_capacity(7);
    while (tau1 - tau) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::IntegratorFailure { tau, reason: "step budget exhausted".into() });
        }
        let remaining = (tau1 - tau).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        let step = if last { remaining } else { h } * dir;
        k.clear();
        for i in 0..7 {
            let mut z = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[i][j];
                if a != 0.0 {
                    z += kj * (step * a);
                }
            }
            k.push(stage(gen, tau, C[i] * step, &z)?);
        }
        let mut y_new = y.clone();
        let mut delta = DMatrix::zeros(y.nrows(), y.ncols());
        for i in 0..7 {
            if B[i] != 0.0 {
                y_new += &k[i] * (step * B[i]);
            }
            let e = B[i] - BHAT[i];
            if e != 0.0 {
                delta += &k[i] * (step * e);
            }
        }
        let err = column_error(&delta, y, &y_new, opts);
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorFailure { tau, reason: "non-finite state".into() });
        }
        if err <= 1.0 {
            gen.apply_exp(step, &mut y_new);
            *y = y_new;
            tau = if last { tau1 } else { tau + step };
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (step.abs() * factor).min(opts.h_max);
        if h < opts.h_min {
            return Err(Error::IntegratorFailure { tau, reason: format!("step size {h:.3e} below minimum") });
        }
    }
    Ok(stats)
}

/// Result of transporting an orthonormal frame: `Φ(τ1, τ0) Q0 = Q1 R`.
#[derive(Debug, Clone)]
pub struct FrameTransport {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub stats: StepStats,
}

/// Transport the column span of `q` from `tau0` to `tau1`, re-orthonormalizing
/// every `orth_step` in `τ`.
pub fn transport_frame<G: Generator + ?Sized>(
    gen: &G,
    q: &DMatrix<f64>,
    tau0: f64,
    tau1: f64,
    orth_step: f64,
    opts: &IntegratorOptions,
    max_condition: f64,
) -> Result<FrameTransport> {
    let k = q.ncols();
    let mut r_total = DMatrix::identity(k, k);
    let mut y = q.clone();
    let mut stats = StepStats::default();
    if k == 0 || tau0 == tau1 {
        return Ok(FrameTransport { q: y, r: r_total, stats });
    }
    let pieces = ((tau1 - tau0).abs() / orth_step).ceil().max(1.0) as usize;
    let h = (tau1 - tau0) / pieces as f64;
    for p in 0..pieces {
        let a = tau0 + p as f64 * h;
        let b = if p + 1 == pieces { tau1 } else { a + h };
        stats += integrate(gen, &mut y, a, b, opts)?;
        let mut normalized = y.clone();
        for mut col in normalized.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= nrm;
            }
        }
        let cond = gram_condition(&normalized);
        if !(cond <= max_condition) {
            return Err(Error::RankCollapse { tau: b, condition: cond });
        }
        let (qn, r) = mgs_qr(&y);
        r_total = r * r_total;
        y = qn;
    }
    Ok(FrameTransport { q: y, r: r_total, stats })
}
