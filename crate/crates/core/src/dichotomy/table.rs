use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::{check_alpha, DEFAULT_GAP_TOL};
use super::spectral::{embed_slot_blocks, slot_spectral_frames, spectral_projections_a, Flavor, SubspaceFrame};
use crate::error::{Error, Result};
use crate::integrator::{integrate, transport_frame, Generator, IntegratorOptions};
use crate::linalg::{min_principal_angle, solve_upper};
use crate::ses::{PotentialSpec, RescaledState, SesOperator};
use crate::sphere::SphereField;

pub const TABLE_FORMAT_VERSION: u32 = 1;

/// Which half line the table covers. On the minus side the unstable range is
/// fixed by the asymptotic condition at the left end; on the plus side the
/// stable range is fixed at the right end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HalfLine {
    Minus,
    Plus,
}

#[derive(Debug, Clone)]
pub struct DichotomyConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub l_max: usize,
    pub n_sys: usize,
    pub potential: PotentialSpec,
    pub tau_grid: Vec<f64>,
    pub half_line: HalfLine,
    pub tau_min: Option<f64>,
    pub tau_max: Option<f64>,
    pub gap_tol: f64,
    pub asymptotic_tol: f64,
    pub transversality_tol: f64,
    pub orth_step: f64,
    pub max_condition: f64,
    pub integrator: IntegratorOptions,
    /// Build the kernel frames too; detection problems only need the range.
    pub kernel: bool,
}

impl DichotomyConfig {
    pub fn new(n: usize, alpha: f64, l_max: usize, potential: PotentialSpec, tau_grid: Vec<f64>) -> Self {
        Self {
            n,
            alpha,
            beta: 0.0,
            l_max,
            n_sys: 1,
            potential,
            tau_grid,
            half_line: HalfLine::Minus,
            tau_min: None,
            tau_max: None,
            gap_tol: DEFAULT_GAP_TOL,
            asymptotic_tol: 1e-10,
            transversality_tol: 1e-8,
            orth_step: 0.5,
            max_condition: 1e8,
            integrator: IntegratorOptions::default(),
            kernel: true,
        }
    }
}

/// Measured dichotomy constants: `‖Φ^u(τ, τ₀)‖ <= K e^{η^u (τ - τ₀)}` for
/// `τ <= τ₀` and `‖Φ^s(τ, τ₀)‖ <= K e^{-η^s (τ - τ₀)}` for `τ >= τ₀`, on grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub eta_u: f64,
    pub eta_s: f64,
    pub k: f64,
    pub min_angle: f64,
}

/// `e^{2τ} sup_{t <= e^τ} |V|`.
pub fn asymptotic_value(potential: &PotentialSpec, tau: f64) -> f64 {
    (2.0 * tau).exp() * potential.sup_bound(tau.exp())
}

/// Largest `τ <= cap` with `e^{2τ} sup |V| < tol`.
pub fn auto_tau_min(potential: &PotentialSpec, tol: f64, cap: f64) -> Result<f64> {
    if asymptotic_value(potential, cap) < tol {
        return Ok(cap);
    }
    let mut hi = cap;
    let mut lo = cap - 1.0;
    while asymptotic_value(potential, lo) >= tol {
        hi = lo;
        lo -= 1.0;
        if lo < -350.0 {
            return Err(Error::AsymptoticCondition { tau_min: lo, value: asymptotic_value(potential, lo) });
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if asymptotic_value(potential, mid) < tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn far_field_value(potential: &PotentialSpec, n: usize, tau: f64) -> Result<f64> {
    let t = tau.exp();
    let mut sup: f64 = 0.0;
    let quad = crate::sphere::SphereQuadrature::new(n, 6)?;
    for node in &quad.nodes {
        sup = sup.max(potential.value(t, node)?.abs());
        if potential.is_radial() {
            break;
        }
    }
    Ok((2.0 * tau).exp() * sup)
}

/// Smallest `τ >= floor` with `e^{2τ} |V(e^τ, ·)| < tol` (sampled).
pub fn auto_tau_max(potential: &PotentialSpec, n: usize, tol: f64, floor: f64) -> Result<f64> {
    let mut tau = floor;
    while far_field_value(potential, n, tau)? >= tol {
        tau += 1.0;
        if tau > floor + 350.0 {
            return Err(Error::AsymptoticCondition { tau_min: tau, value: far_field_value(potential, n, tau)? });
        }
    }
    Ok(tau)
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("tau grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("tau grid contains non-finite values".into()));
    }
    let mut g = grid.to_vec();
    if g.len() > 1 && g[1] < g[0] {
        g.reverse();
    }
    if g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("tau grid must be strictly monotone".into()));
    }
    Ok(g)
}

struct Sweep {
    frames: Vec<DMatrix<f64>>,
    transitions: Vec<DMatrix<f64>>,
}

/// Forward sweep of the range from `start <= grid[0]`, or backward sweep of
/// the kernel from `start >= grid[last]`.
fn sweep<G: Generator + ?Sized>(
    gen: &G,
    q0: &DMatrix<f64>,
    start: f64,
    grid: &[f64],
    forward: bool,
    cfg: &DichotomyConfig,
) -> Result<Sweep> {
    let g = grid.len();
    let (first, entry) = if forward { (0, grid[0]) } else { (g - 1, grid[g - 1]) };
    let step = cfg.orth_step;
    let opts = &cfg.integrator;
    let mut frames = vec![DMatrix::zeros(0, 0); g];
    let mut transitions = vec![DMatrix::zeros(0, 0); g.saturating_sub(1)];
    frames[first] = transport_frame(gen, q0, start, entry, step, opts, cfg.max_condition)?.q;
    if forward {
        for i in 0..g - 1 {
            let tr = transport_frame(gen, &frames[i], grid[i], grid[i + 1], step, opts, cfg.max_condition)?;
            frames[i + 1] = tr.q;
            transitions[i] = tr.r;
        }
    } else {
        for i in (0..g - 1).rev() {
            let tr = transport_frame(gen, &frames[i + 1], grid[i + 1], grid[i], step, opts, cfg.max_condition)?;
            frames[i] = tr.q;
            transitions[i] = tr.r;
        }
    }
    Ok(Sweep { frames, transitions })
}

fn block_diagonal(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let size: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(size, size);
    let mut o = 0;
    for b in blocks {
        out.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(*b);
        o += b.nrows();
    }
    out
}

/// Per-slot sweeps for radial potentials, embedded block-diagonally.
fn radial_sweeps(op: &SesOperator, cfg: &DichotomyConfig, grid: &[f64], left: f64, right: f64) -> Result<(Sweep, Option<Sweep>)> {
    let slots = op.slots();
    let first_slot: Vec<usize> =
        (0..=cfg.l_max).map(|l| (0..slots).find(|s| op.slot_degree(*s) == l).expect("every degree has a slot")).collect();
    let per_degree: Vec<(Sweep, Option<Sweep>)> = (0..=cfg.l_max)
        .into_par_iter()
        .map(|l| -> Result<_> {
            let sys = op.slot_system(first_slot[l])?;
            let (u0, _, s0, _) = slot_spectral_frames(cfg.n, cfg.alpha, cfg.beta, l);
            let u = sweep(&sys, &u0, left, grid, true, cfg)?;
            let s = if cfg.kernel { Some(sweep(&sys, &s0, right, grid, false, cfg)?) } else { None };
            Ok((u, s))
        })
        .collect::<Result<_>>()?;
    let degrees: Vec<usize> = (0..slots).map(|s| op.slot_degree(s)).collect();
    let embed = |sweeps: Vec<&Sweep>| -> Sweep {
        let frames = (0..grid.len())
            .map(|i| {
                let blocks: Vec<&DMatrix<f64>> = degrees.iter().map(|l| &sweeps[*l].frames[i]).collect();
                embed_slot_blocks(slots, &blocks)
            })
            .collect();
        let transitions = (0..grid.len().saturating_sub(1))
            .map(|i| {
                let blocks: Vec<&DMatrix<f64>> = degrees.iter().map(|l| &sweeps[*l].transitions[i]).collect();
                block_diagonal(&blocks)
            })
            .collect();
        Sweep { frames, transitions }
    };
    let u = embed(per_degree.iter().map(|p| &p.0).collect());
    let s = if cfg.kernel { Some(embed(per_degree.iter().map(|p| p.1.as_ref().unwrap()).collect())) } else { None };
    Ok((u, s))
}

/// Orthonormalization interval limited by the spread of growth rates in a frame.
fn effective_orth_step(cfg: &DichotomyConfig, rates: &[f64]) -> f64 {
    let spread = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - rates.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread > 0.0 {
        cfg.orth_step.min(1e3f64.ln() / spread)
    } else {
        cfg.orth_step
    }
}

pub fn build_dichotomy(cfg: &DichotomyConfig) -> Result<DichotomyTable> {
    check_alpha(cfg.n, cfg.alpha, cfg.gap_tol)?;
    if !(cfg.orth_step > 0.0) {
        return Err(Error::InvalidArgument("orthonormalization step must be positive".into()));
    }
    let grid = sorted_grid(&cfg.tau_grid)?;
    let op = SesOperator::new(cfg.n, cfg.alpha, cfg.beta, cfg.l_max, cfg.n_sys, cfg.potential.clone())?;
    let (left, right) = match cfg.half_line {
        HalfLine::Minus => {
            let left = match cfg.tau_min {
                Some(t) => {
                    if t > grid[0] {
                        return Err(Error::InvalidArgument(format!("tau_min = {t} lies above the grid start {}", grid[0])));
                    }
                    let v = asymptotic_value(&cfg.potential, t);
                    if !(v < cfg.asymptotic_tol) {
                        return Err(Error::AsymptoticCondition { tau_min: t, value: v });
                    }
                    t
                }
                None => auto_tau_min(&cfg.potential, cfg.asymptotic_tol, grid[0])?,
            };
            (left, *grid.last().unwrap())
        }
        HalfLine::Plus => {
            let last = *grid.last().unwrap();
            let right = match cfg.tau_max {
                Some(t) => {
                    if t < last {
                        return Err(Error::InvalidArgument(format!("tau_max = {t} lies below the grid end {last}")));
                    }
                    let v = far_field_value(&cfg.potential, cfg.n, t)?;
                    if !(v < cfg.asymptotic_tol) {
                        return Err(Error::AsymptoticCondition { tau_min: t, value: v });
                    }
                    t
                }
                None => auto_tau_max(&cfg.potential, cfg.n, cfg.asymptotic_tol, last)?,
            };
            (grid[0], right)
        }
    };

    let (u, s) = if cfg.potential.is_radial() {
        radial_sweeps(&op, cfg, &grid, left, right)?
    } else {
        let split = spectral_projections_a(cfg.n, cfg.alpha, cfg.beta, cfg.l_max, cfg.n_sys)?;
        let sys = op.weighted_system();
        let mut local = cfg.clone();
        local.orth_step = effective_orth_step(cfg, &split.unstable_rates);
        let u = sweep(&sys, &split.unstable.vectors, left, &grid, true, &local)?;
        let s = if cfg.kernel {
            local.orth_step = effective_orth_step(cfg, &split.stable_rates);
            Some(sweep(&sys, &split.stable.vectors, right, &grid, false, &local)?)
        } else {
            None
        };
        (u, s)
    };

    let mut table = DichotomyTable {
        version: TABLE_FORMAT_VERSION,
        n: cfg.n,
        alpha: cfg.alpha,
        beta: cfg.beta,
        l_max: cfg.l_max,
        n_sys: cfg.n_sys,
        half_line: cfg.half_line,
        tau_left: left,
        tau_right: right,
        tau_grid: grid,
        unstable: u.frames,
        unstable_transitions: u.transitions,
        stable: Vec::new(),
        stable_transitions: Vec::new(),
        certificate: RateCertificate { eta_u: 0.0, eta_s: 0.0, k: 1.0, min_angle: std::f64::consts::FRAC_PI_2 },
        orth_step: cfg.orth_step,
        integrator: cfg.integrator,
        transversality_tol: cfg.transversality_tol,
        op: Some(op),
        inverses: Vec::new(),
    };
    if let Some(s) = s {
        table.stable = s.frames;
        table.stable_transitions = s.transitions;
    }
    table.finish()?;
    Ok(table)
}

/// Range and kernel frames of `P^u(τ)` on a `τ`-grid, with the upper-triangular
/// transition factors `Φ(τ_{i+1}, τ_i) U_i = U_{i+1} T^u_i` and
/// `Φ(τ_i, τ_{i+1}) S_{i+1} = S_i T^s_i`. Frames live in weighted coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyTable {
    pub version: u32,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub l_max: usize,
    pub n_sys: usize,
    pub half_line: HalfLine,
    pub tau_left: f64,
    pub tau_right: f64,
    pub tau_grid: Vec<f64>,
    pub unstable: Vec<DMatrix<f64>>,
    pub unstable_transitions: Vec<DMatrix<f64>>,
    pub stable: Vec<DMatrix<f64>>,
    pub stable_transitions: Vec<DMatrix<f64>>,
    pub certificate: RateCertificate,
    pub orth_step: f64,
    pub integrator: IntegratorOptions,
    pub transversality_tol: f64,
    #[serde(skip)]
    op: Option<SesOperator>,
    #[serde(skip)]
    inverses: Vec<DMatrix<f64>>,
}

fn min_log_singular(t: &DMatrix<f64>, dt: f64) -> f64 {
    if t.nrows() == 0 {
        return f64::INFINITY;
    }
    t.clone().singular_values().min().ln() / dt
}

impl DichotomyTable {
    fn finish(&mut self) -> Result<()> {
        let mut eta_u = f64::INFINITY;
        let mut eta_s = f64::INFINITY;
        for i in 0..self.tau_grid.len().saturating_sub(1) {
            let dt = self.tau_grid[i + 1] - self.tau_grid[i];
            eta_u = eta_u.min(min_log_singular(&self.unstable_transitions[i], dt));
            if self.has_kernel() {
                eta_s = eta_s.min(min_log_singular(&self.stable_transitions[i], dt));
            }
        }
        self.certificate.eta_u = if eta_u.is_finite() { eta_u } else { 0.0 };
        self.certificate.eta_s = if eta_s.is_finite() { eta_s } else { 0.0 };
        self.inverses.clear();
        if !self.has_kernel() {
            return Ok(());
        }
        let mut min_angle = std::f64::consts::FRAC_PI_2;
        for (i, tau) in self.tau_grid.iter().enumerate() {
            let angle = min_principal_angle(&self.unstable[i], &self.stable[i]);
            if angle < self.transversality_tol {
                return Err(Error::Transversality { tau: *tau, angle });
            }
            min_angle = min_angle.min(angle);
            let basis = concat(&self.unstable[i], &self.stable[i]);
            let inv = basis.try_inverse().ok_or(Error::Transversality { tau: *tau, angle })?;
            self.inverses.push(inv);
        }
        self.certificate.min_angle = min_angle;
        self.certificate.k = 1.0 / min_angle.sin();
        Ok(())
    }

    pub fn has_kernel(&self) -> bool {
        !self.stable.is_empty()
    }

    pub fn operator(&self) -> Result<&SesOperator> {
        self.op.as_ref().ok_or_else(|| Error::InvalidArgument("table has no potential attached".into()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Reload a dumped table; the potential is not part of the dump and must be supplied.
    pub fn from_json(text: &str, potential: PotentialSpec) -> Result<Self> {
        let mut t: Self = serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if t.version != TABLE_FORMAT_VERSION {
            return Err(Error::Serialization(format!("unsupported table format version {}", t.version)));
        }
        t.op = Some(SesOperator::new(t.n, t.alpha, t.beta, t.l_max, t.n_sys, potential)?);
        t.finish()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.unstable.first().map_or(0, |u| u.nrows())
    }

    pub fn range_dim(&self) -> usize {
        self.unstable.first().map_or(0, |u| u.ncols())
    }

    pub fn kernel_dim(&self) -> usize {
        self.stable.first().map_or(0, |s| s.ncols())
    }

    pub fn grid_index(&self, tau: f64) -> Option<usize> {
        let tol = 1e-12 * tau.abs().max(1.0);
        self.tau_grid.iter().position(|t| (t - tau).abs() <= tol)
    }

    fn check_range(&self, tau: f64) -> Result<()> {
        let lo = self.tau_grid[0];
        let hi = *self.tau_grid.last().unwrap();
        let tol = 1e-12 * tau.abs().max(1.0);
        if tau < lo - tol || tau > hi + tol || !tau.is_finite() {
            return Err(Error::OutOfGrid { tau, lo, hi });
        }
        Ok(())
    }

    fn below(&self, tau: f64) -> usize {
        match self.grid_index(tau) {
            Some(i) => i,
            None => self.tau_grid.partition_point(|t| *t <= tau).saturating_sub(1),
        }
    }

    fn above(&self, tau: f64) -> usize {
        match self.grid_index(tau) {
            Some(i) => i,
            None => self.tau_grid.partition_point(|t| *t < tau).min(self.tau_grid.len() - 1),
        }
    }

    pub fn unstable_frame(&self, i: usize) -> SubspaceFrame {
        SubspaceFrame { tau: self.tau_grid[i], flavor: Flavor::Unstable, vectors: self.unstable[i].clone() }
    }

    pub fn stable_frame(&self, i: usize) -> SubspaceFrame {
        SubspaceFrame { tau: self.tau_grid[i], flavor: Flavor::Stable, vectors: self.stable[i].clone() }
    }

    /// Per-column growth exponents `ln T_kk / Δτ` of the transition on `[τ_i, τ_{i+1}]`.
    pub fn diagonal_rates(&self, i: usize, flavor: Flavor) -> Vec<f64> {
        let dt = self.tau_grid[i + 1] - self.tau_grid[i];
        let t = match flavor {
            Flavor::Unstable => &self.unstable_transitions[i],
            Flavor::Stable => &self.stable_transitions[i],
        };
        (0..t.nrows()).map(|k| t[(k, k)].ln() / dt).collect()
    }

    fn transport(&self, q: &DMatrix<f64>, from: f64, to: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let op = self.operator()?;
        let sys = op.weighted_system();
        let tr = transport_frame(&sys, q, from, to, self.orth_step, &self.integrator, f64::INFINITY)?;
        Ok((tr.q, tr.r))
    }

    fn integrate_vector(&self, y: &mut DMatrix<f64>, from: f64, to: f64) -> Result<()> {
        let op = self.operator()?;
        integrate(&op.weighted_system(), y, from, to, &self.integrator)?;
        Ok(())
    }

    /// Range frame at `τ`: `Φ(τ, τ_i) U_i = Q R` with `τ_i` the grid point at or below `τ`.
    fn unstable_local(&self, tau: f64) -> Result<(usize, DMatrix<f64>, DMatrix<f64>)> {
        self.check_range(tau)?;
        let i = self.below(tau);
        if self.grid_index(tau) == Some(i) {
            let k = self.range_dim();
            return Ok((i, self.unstable[i].clone(), DMatrix::identity(k, k)));
        }
        let (q, r) = self.transport(&self.unstable[i], self.tau_grid[i], tau)?;
        Ok((i, q, r))
    }

    /// Kernel frame at `τ`: `Φ(τ, τ_j) S_j = Q R` with `τ_j` the grid point at or above `τ`.
    fn stable_local(&self, tau: f64) -> Result<(usize, DMatrix<f64>, DMatrix<f64>)> {
        self.check_range(tau)?;
        if !self.has_kernel() {
            return Err(Error::InvalidArgument("table was built without kernel frames".into()));
        }
        let j = self.above(tau);
        if self.grid_index(tau) == Some(j) {
            let k = self.kernel_dim();
            return Ok((j, self.stable[j].clone(), DMatrix::identity(k, k)));
        }
        let (q, r) = self.transport(&self.stable[j], self.tau_grid[j], tau)?;
        Ok((j, q, r))
    }

    /// Frames of `R(P^u(τ))` and `ker P^u(τ)` at any `τ` in the grid range.
    pub fn frames_at(&self, tau: f64) -> Result<(SubspaceFrame, SubspaceFrame)> {
        let (_, u, _) = self.unstable_local(tau)?;
        let (_, s, _) = self.stable_local(tau)?;
        Ok((
            SubspaceFrame { tau, flavor: Flavor::Unstable, vectors: u },
            SubspaceFrame { tau, flavor: Flavor::Stable, vectors: s },
        ))
    }

    /// Coordinates of weighted vectors `y` in the grid frames: `y = U_i a + S_i b`.
    pub fn split_coordinates(&self, i: usize, y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let c = &self.inverses[i] * y;
        let k = self.range_dim();
        (c.rows(0, k).into_owned(), c.rows(k, c.nrows() - k).into_owned())
    }

    fn decompose(&self, tau: f64, y: &DMatrix<f64>) -> Result<Decomposition> {
        let (i, qu, ru) = self.unstable_local(tau)?;
        let (j, qs, rs) = self.stable_local(tau)?;
        let (a, b) = match (self.grid_index(tau), self.grid_index(tau)) {
            (Some(g), _) if g == i && g == j => self.split_coordinates(g, y),
            _ => {
                let basis = concat(&qu, &qs);
                let angle = min_principal_angle(&qu, &qs);
                if angle < self.transversality_tol {
                    return Err(Error::Transversality { tau, angle });
                }
                let c = basis.lu().solve(y).ok_or(Error::Transversality { tau, angle })?;
                let k = qu.ncols();
                (c.rows(0, k).into_owned(), c.rows(k, c.nrows() - k).into_owned())
            }
        };
        Ok(Decomposition { i, qu, ru, a, j, qs, rs, b })
    }

    /// `P^{u,s}(τ)` as a matrix in natural coordinates.
    pub fn projection_matrix(&self, tau: f64, flavor: Flavor) -> Result<DMatrix<f64>> {
        let op = self.operator()?;
        let w = DMatrix::from_diagonal(&DVector::from_vec(op.weights()));
        let d = self.decompose(tau, &w)?;
        let pw = match flavor {
            Flavor::Unstable => &d.qu * &d.a,
            Flavor::Stable => &d.qs * &d.b,
        };
        Ok(op.from_weighted(&pw))
    }

    /// `P^{u,s}(τ) z` with `z` in natural coordinates (columns).
    pub fn project_columns(&self, z: &DMatrix<f64>, tau: f64, flavor: Flavor) -> Result<DMatrix<f64>> {
        let op = self.operator()?;
        let d = self.decompose(tau, &op.to_weighted(z))?;
        let pw = match flavor {
            Flavor::Unstable => &d.qu * &d.a,
            Flavor::Stable => &d.qs * &d.b,
        };
        Ok(op.from_weighted(&pw))
    }

    pub fn project(&self, z: &RescaledState, flavor: Flavor) -> Result<RescaledState> {
        let cols = self.project_columns(&z.to_columns(), z.tau, flavor)?;
        Ok(RescaledState::from_columns(z.tau, self.alpha, &z.f, &cols))
    }

    /// `Φ^{u,s}(τ, τ₀) z` for natural-coordinate columns `z` given at `τ₀`.
    pub fn apply_phi_columns(&self, z: &DMatrix<f64>, tau: f64, tau0: f64, flavor: Flavor) -> Result<DMatrix<f64>> {
        match flavor {
            Flavor::Unstable if tau > tau0 => {
                return Err(Error::TimeOrdering(format!("unstable evolution needs tau <= tau0, got {tau} > {tau0}")))
            }
            Flavor::Stable if tau < tau0 => {
                return Err(Error::TimeOrdering(format!("stable evolution needs tau >= tau0, got {tau} < {tau0}")))
            }
            _ => {}
        }
        self.check_range(tau)?;
        let op = self.operator()?;
        let d = self.decompose(tau0, &op.to_weighted(z))?;
        let k = self.below(tau);
        let out = match flavor {
            Flavor::Unstable => {
                let mut c = solve_upper_columns(&d.ru, &d.a);
                for idx in (k..d.i).rev() {
                    c = solve_upper_columns(&self.unstable_transitions[idx], &c);
                }
                let mut y = &self.unstable[k] * c;
                self.integrate_vector(&mut y, self.tau_grid[k], tau)?;
                y
            }
            Flavor::Stable => {
                if tau <= self.tau_grid[d.j] {
                    let mut y = &d.qs * &d.b;
                    self.integrate_vector(&mut y, tau0, tau)?;
                    y
                } else {
                    let mut c = solve_upper_columns(&d.rs, &d.b);
                    for idx in d.j..k {
                        c = solve_upper_columns(&self.stable_transitions[idx], &c);
                    }
                    let mut y = &self.stable[k] * c;
                    self.integrate_vector(&mut y, self.tau_grid[k], tau)?;
                    y
                }
            }
        };
        Ok(op.from_weighted(&out))
    }

    pub fn apply_phi(&self, z: &RescaledState, tau: f64, tau0: f64, flavor: Flavor) -> Result<RescaledState> {
        let cols = self.apply_phi_columns(&z.to_columns(), tau, tau0, flavor)?;
        Ok(RescaledState::from_columns(tau, self.alpha, &z.f, &cols))
    }

    pub fn certificate(&self) -> RateCertificate {
        self.certificate
    }

    /// Zero state with this table's truncation.
    pub fn zero_state(&self, tau: f64) -> RescaledState {
        let z = SphereField::zeros(self.n, self.l_max, self.n_sys);
        RescaledState { tau, alpha: self.alpha, f: z.clone(), g: z }
    }
}

struct Decomposition {
    i: usize,
    qu: DMatrix<f64>,
    ru: DMatrix<f64>,
    a: DMatrix<f64>,
    j: usize,
    qs: DMatrix<f64>,
    rs: DMatrix<f64>,
    b: DMatrix<f64>,
}

fn concat(u: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(u.nrows(), u.ncols() + s.ncols());
    m.columns_mut(0, u.ncols()).copy_from(u);
    m.columns_mut(u.ncols(), s.ncols()).copy_from(s);
    m
}

pub(crate) fn solve_upper_columns(r: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for j in 0..b.ncols() {
        let col = solve_upper(r, &b.column(j).into_owned());
        out.set_column(j, &col);
    }
    out
}
