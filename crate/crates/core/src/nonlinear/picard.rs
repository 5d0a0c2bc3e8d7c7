use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::nonlinearity::{NonlinearEvaluator, Nonlinearity};
use super::trajectory::{IterationRecord, SolutionTrajectory};
use crate::dichotomy::{build_dichotomy, DichotomyConfig, DichotomyTable, HalfLine};
use crate::error::{Error, Result};
use crate::ses::{PotentialSpec, RescaledState};
use crate::sphere::{gauss_legendre, SphereField};

/// `Δu - V u = F(x, u)` on a ball of radius `T` or on the whole space.
#[derive(Debug, Clone)]
pub struct NonlinearProblem {
    pub n: usize,
    pub alpha: f64,
    pub l_max: usize,
    pub potential: PotentialSpec,
    pub nonlinearity: Nonlinearity,
    /// `None` for whole-space problems.
    pub radius: Option<f64>,
    pub grid_step: f64,
    /// Left end of the computational grid.
    pub tau_start: f64,
    /// Right end of the plus half-line grid.
    pub tau_end: f64,
}

/// Uniform grid on `[lo, hi]` with step close to `step`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(hi > lo) || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("bad grid [{lo}, {hi}] with step {step}")));
    }
    let m = ((hi - lo) / step).round().max(1.0) as usize;
    Ok((0..=m).map(|i| if i == m { hi } else { lo + (hi - lo) * i as f64 / m as f64 }).collect())
}

impl NonlinearProblem {
    pub fn new(n: usize, alpha: f64, l_max: usize, potential: PotentialSpec, nonlinearity: Nonlinearity) -> Self {
        Self { n, alpha, l_max, potential, nonlinearity, radius: None, grid_step: 0.05, tau_start: -8.0, tau_end: 8.0 }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn with_grid(mut self, tau_start: f64, tau_end: f64, step: f64) -> Self {
        self.tau_start = tau_start;
        self.tau_end = tau_end;
        self.grid_step = step;
        self
    }

    fn config(&self, grid: Vec<f64>, half_line: HalfLine) -> DichotomyConfig {
        let mut cfg = DichotomyConfig::new(self.n, self.alpha, self.l_max, self.potential.clone(), grid);
        cfg.half_line = half_line;
        cfg
    }

    /// Dichotomy table on `[tau_start, log T]`.
    pub fn ball_table(&self) -> Result<DichotomyTable> {
        let t = self.radius.ok_or_else(|| Error::InvalidArgument("ball problem needs a radius".into()))?;
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {t}")));
        }
        build_dichotomy(&self.config(uniform_grid(self.tau_start, t.ln(), self.grid_step)?, HalfLine::Minus))
    }

    /// Tables on `[tau_start, 0]` and `[0, tau_end]`.
    pub fn half_line_tables(&self) -> Result<(DichotomyTable, DichotomyTable)> {
        let minus = build_dichotomy(&self.config(uniform_grid(self.tau_start, 0.0, self.grid_step)?, HalfLine::Minus))?;
        let plus = build_dichotomy(&self.config(uniform_grid(0.0, self.tau_end, self.grid_step)?, HalfLine::Plus))?;
        Ok((minus, plus))
    }
}

/// Weights `Δ ∫_0^1 e^{x(u - u_j)} L_j(u) du` for the Lagrange basis `L_j` on
/// `nodes` (in units of `Δ` from the interval start). Applied to values
/// transported to the evaluation end, they integrate `e^{κσ} p(σ)` exactly
/// for `p` of degree `< nodes.len()`.
fn fitted_weights(x: f64, nodes: &[f64], dt: f64, gl: &(Vec<f64>, Vec<f64>)) -> Vec<f64> {
    nodes
        .iter()
        .enumerate()
        .map(|(j, uj)| {
            let mut acc = 0.0;
            for (z, w) in gl.0.iter().zip(&gl.1) {
                let u = 0.5 * (z + 1.0);
                let lj: f64 =
                    nodes.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, uk)| (u - uk) / (uj - uk)).product();
                acc += 0.5 * w * (x * (u - uj)).exp() * lj;
            }
            acc * dt
        })
        .collect()
}

struct Interval {
    dt: f64,
    ts_inv: DMatrix<f64>,
    tu_inv: DMatrix<f64>,
    /// Stable-side weights for grid points `i + 1, i, i - 1` (values transported to `τ_{i+1}`).
    ws: Vec<DVector<f64>>,
    /// Unstable-side weights for grid points `i, i + 1, i + 2` (values transported to `τ_i`).
    wu: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest relaxation factor `ω`; `1` is the plain iteration.
    pub relaxation: f64,
    /// Halve `ω` when a step does not reduce the defect instead of failing.
    pub adaptive: bool,
    /// Anderson mixing depth; `0` disables mixing.
    pub anderson: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, relaxation: 1.0, adaptive: true, anderson: 5 }
    }
}

pub(crate) struct Solved {
    pub states: Vec<DMatrix<f64>>,
    pub defect: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
}

/// Fixed-point map of the integral equations in frame coordinates.
///
/// States are natural-coordinate columns (`D × 2`, real and imaginary part).
pub(crate) struct Engine<'a> {
    pub table: &'a DichotomyTable,
    eval: NonlinearEvaluator,
    weights: Vec<f64>,
    slots: usize,
    intervals: Vec<Interval>,
    tail_s: DVector<f64>,
    tail_u: DVector<f64>,
    template: SphereField,
}

fn invert_upper(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    t.clone().try_inverse().ok_or_else(|| Error::SingularJacobian { rcond: 0.0 })
}

impl<'a> Engine<'a> {
    pub fn new(table: &'a DichotomyTable, nonlinearity: &Nonlinearity) -> Result<Self> {
        if !table.has_kernel() {
            return Err(Error::InvalidArgument("fixed-point solves need kernel frames in the table".into()));
        }
        if table.n_sys != 1 {
            return Err(Error::InvalidArgument("nonlinear solver supports scalar equations (n_sys = 1)".into()));
        }
        let op = table.operator()?;
        let alpha = table.alpha;
        let m = table.tau_grid.len();
        if m < 2 {
            return Err(Error::InvalidArgument("fixed-point solves need at least two grid points".into()));
        }
        let grid = &table.tau_grid;
        let gl = gauss_legendre(16);
        let mut intervals = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let dt = grid[i + 1] - grid[i];
            let ts = &table.stable_transitions[i];
            let tu = &table.unstable_transitions[i];
            let unit = |j: usize| (grid[j] - grid[i]) / dt;
            let s_nodes: Vec<f64> = if i > 0 { vec![1.0, 0.0, unit(i - 1)] } else { vec![1.0, 0.0] };
            let u_nodes: Vec<f64> = if i + 2 < m { vec![0.0, 1.0, unit(i + 2)] } else { vec![0.0, 1.0] };
            let mut ws = vec![DVector::zeros(ts.nrows()); s_nodes.len()];
            for k in 0..ts.nrows() {
                let kappa = alpha + 2.0 + ts[(k, k)].ln() / dt;
                for (j, w) in fitted_weights(kappa * dt, &s_nodes, dt, &gl).into_iter().enumerate() {
                    ws[j][k] = w;
                }
            }
            let mut wu = vec![DVector::zeros(tu.nrows()); u_nodes.len()];
            for k in 0..tu.nrows() {
                let kappa = alpha + 2.0 - tu[(k, k)].ln() / dt;
                for (j, w) in fitted_weights(kappa * dt, &u_nodes, dt, &gl).into_iter().enumerate() {
                    wu[j][k] = w;
                }
            }
            intervals.push(Interval { dt, ts_inv: invert_upper(ts)?, tu_inv: invert_upper(tu)?, ws, wu });
        }
        let first = &intervals[0];
        let tail_s = DVector::from_iterator(
            table.kernel_dim(),
            (0..table.kernel_dim()).map(|k| {
                let kappa = alpha + 2.0 + table.stable_transitions[0][(k, k)].ln() / first.dt;
                if kappa > 0.0 {
                    1.0 / kappa
                } else {
                    0.0
                }
            }),
        );
        let last = m - 2;
        let tail_u = DVector::from_iterator(
            table.range_dim(),
            (0..table.range_dim()).map(|k| {
                let kappa = alpha + 2.0 - table.unstable_transitions[last][(k, k)].ln() / intervals[last].dt;
                if kappa < 0.0 {
                    -1.0 / kappa
                } else {
                    0.0
                }
            }),
        );
        Ok(Self {
            table,
            eval: NonlinearEvaluator::new(nonlinearity.clone(), table.n, table.l_max)?,
            weights: op.weights(),
            slots: op.slots(),
            intervals,
            tail_s,
            tail_u,
            template: SphereField::zeros(table.n, table.l_max, 1),
        })
    }

    pub fn len(&self) -> usize {
        self.table.tau_grid.len()
    }

    pub fn is_linear(&self) -> bool {
        self.eval.nonlinearity.is_zero()
    }

    fn weighted(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = z.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= self.weights[i];
        }
        out
    }

    fn natural(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = y.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row /= self.weights[i];
        }
        out
    }

    pub fn h_norm(&self, z: &DMatrix<f64>) -> f64 {
        self.weighted(z).norm()
    }

    pub fn f_field(&self, z: &DMatrix<f64>) -> SphereField {
        let mut f = self.template.clone();
        for (k, c) in f.coeffs.iter_mut().enumerate() {
            c.re = z[(k, 0)];
            c.im = z[(k, 1)];
        }
        f
    }

    /// Natural-coordinate source `(0, e^{(α+2)τ} F)` at grid point `i`.
    pub fn source(&self, i: usize, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let s = self.eval.evaluate(self.table.tau_grid[i], &self.f_field(z), self.table.alpha)?;
        let mut out = DMatrix::zeros(2 * self.slots, 2);
        for (k, c) in s.coeffs.iter().enumerate() {
            out[(self.slots + k, 0)] = c.re;
            out[(self.slots + k, 1)] = c.im;
        }
        Ok(out)
    }

    /// Unstable coordinates of a natural state at the right end.
    pub fn unstable_coordinates(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.table.split_coordinates(self.len() - 1, &self.weighted(z)).0
    }

    /// Stable coordinates of a natural state at the left end.
    pub fn stable_coordinates(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.table.split_coordinates(0, &self.weighted(z)).1
    }

    /// Natural state `U_M e` at the right end.
    pub fn unstable_state(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        self.natural(&(&self.table.unstable[self.len() - 1] * e))
    }

    /// Natural state `S_0 e` at the left end.
    pub fn stable_state(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        self.natural(&(&self.table.stable[0] * e))
    }

    /// One application of the integral operator. The anchor holds unstable
    /// coordinates at the right end on the minus side, stable coordinates at
    /// the left end on the plus side.
    pub fn apply(&self, anchor: &DMatrix<f64>, ys: Option<&[DMatrix<f64>]>) -> Result<Vec<DMatrix<f64>>> {
        let m = self.len();
        let t = self.table;
        let ku = t.range_dim();
        let ks = t.kernel_dim();
        let sources: Vec<(DMatrix<f64>, DMatrix<f64>)> = match ys {
            Some(ys) if !self.is_linear() => (0..m)
                .into_par_iter()
                .map(|i| {
                    let s = self.source(i, &ys[i])?;
                    Ok(t.split_coordinates(i, &self.weighted(&s)))
                })
                .collect::<Result<_>>()?,
            _ => vec![(DMatrix::zeros(ku, 2), DMatrix::zeros(ks, 2)); m],
        };
        let plus = t.half_line == HalfLine::Plus;

        let mut c = vec![DMatrix::zeros(ks, 2); m];
        c[0] = if plus {
            anchor.clone()
        } else {
            let mut tail = sources[0].1.clone();
            for (k, mut row) in tail.row_iter_mut().enumerate() {
                row *= self.tail_s[k];
            }
            tail
        };
        let scale = |w: &DVector<f64>, v: &DMatrix<f64>| {
            let mut out = v.clone();
            for (k, mut row) in out.row_iter_mut().enumerate() {
                row *= w[k];
            }
            out
        };
        // stable sources transported one and two steps to the right
        let mut one = vec![DMatrix::zeros(ks, 2); m];
        for i in 0..m - 1 {
            let iv = &self.intervals[i];
            one[i] = &iv.ts_inv * &sources[i].1;
            let mut acc = &iv.ts_inv * &c[i] + scale(&iv.ws[0], &sources[i + 1].1) + scale(&iv.ws[1], &one[i]);
            if let Some(w) = iv.ws.get(2) {
                acc += scale(w, &(&iv.ts_inv * &one[i - 1]));
            }
            c[i + 1] = acc;
        }

        let mut u = vec![DMatrix::zeros(ku, 2); m];
        u[m - 1] = if plus {
            let mut tail = sources[m - 1].0.clone();
            for (k, mut row) in tail.row_iter_mut().enumerate() {
                row *= -self.tail_u[k];
            }
            tail
        } else {
            anchor.clone()
        };
        let mut back = vec![DMatrix::zeros(ku, 2); m];
        for i in (0..m - 1).rev() {
            let iv = &self.intervals[i];
            back[i] = &iv.tu_inv * &sources[i + 1].0;
            let mut acc = scale(&iv.wu[0], &sources[i].0) + scale(&iv.wu[1], &back[i]);
            if let Some(w) = iv.wu.get(2) {
                acc += scale(w, &(&iv.tu_inv * &back[i + 1]));
            }
            u[i] = &iv.tu_inv * &u[i + 1] - acc;
        }

        Ok((0..m).map(|i| self.natural(&(&t.unstable[i] * &u[i] + &t.stable[i] * &c[i]))).collect())
    }

    pub fn sup_distance(&self, a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| self.h_norm(&(x - y))).fold(0.0, f64::max)
    }

    fn flatten(&self, ys: &[DMatrix<f64>]) -> DVector<f64> {
        let d = self.weights.len();
        let mut out = DVector::zeros(ys.len() * d * 2);
        for (i, y) in ys.iter().enumerate() {
            for c in 0..2 {
                for r in 0..d {
                    out[(i * 2 + c) * d + r] = y[(r, c)] * self.weights[r];
                }
            }
        }
        out
    }

    fn unflatten(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let d = self.weights.len();
        (0..v.len() / (2 * d))
            .map(|i| DMatrix::from_fn(d, 2, |r, c| v[(i * 2 + c) * d + r] / self.weights[r]))
            .collect()
    }

    /// Relaxed Picard iteration `y ← y + ω (G(y) - y)` from `init` (default:
    /// the linear part), optionally with Anderson mixing. Returns the
    /// iterate, its defect, the number of evaluations of `G` and the log.
    pub fn iterate(
        &self,
        anchor: &DMatrix<f64>,
        init: Option<Vec<DMatrix<f64>>>,
        opts: &PicardOptions,
    ) -> Result<Solved> {
        let y0 = match init {
            Some(y) => y,
            None => self.apply(anchor, None)?,
        };
        let g0 = self.apply(anchor, Some(&y0))?;
        let mut defect = self.sup_distance(&g0, &y0);
        let mut x = self.flatten(&y0);
        let mut f = self.flatten(&g0) - &x;
        let mut log = vec![IterationRecord { iteration: 1, update: defect, ratio: f64::NAN, relaxation: 1.0, accepted: true }];
        let mut omega = opts.relaxation;
        let mut history: VecDeque<(DVector<f64>, DVector<f64>)> = VecDeque::new();
        let mut failures = 0;
        let mut k = 1;
        while defect >= opts.tol {
            if k >= opts.max_iter {
                return Err(Error::MaxIterations { max_iter: opts.max_iter, defect });
            }
            k += 1;
            let mixed = !history.is_empty();
            let mut trial = &x + &f * omega;
            if mixed {
                let df = DMatrix::from_columns(&history.iter().map(|h| h.1.clone()).collect::<Vec<_>>());
                if let Ok(gamma) = df.clone().svd(true, true).solve(&f, 1e-12) {
                    for (j, (dx, dfj)) in history.iter().enumerate() {
                        trial -= (dx + dfj * omega) * gamma[j];
                    }
                }
            }
            let ys = self.unflatten(&trial);
            let g_trial = match self.apply(anchor, Some(&ys)) {
                Ok(v) => Some(v),
                Err(Error::Overflow { .. }) if opts.adaptive => None,
                Err(e) => return Err(e),
            };
            let d_trial = g_trial.as_ref().map_or(f64::INFINITY, |g| self.sup_distance(g, &ys));
            let ratio = d_trial / defect;
            let accepted = ratio < 1.0 || (!opts.adaptive && d_trial.is_finite() && failures < 2);
            log.push(IterationRecord { iteration: k, update: d_trial, ratio, relaxation: omega, accepted });
            if !(ratio < 1.0) {
                failures += 1;
                if !opts.adaptive {
                    if failures >= 3 || !d_trial.is_finite() {
                        return Err(Error::NonContraction { iteration: k });
                    }
                } else {
                    if failures >= 8 {
                        return Err(Error::NonContraction { iteration: k });
                    }
                    if mixed {
                        history.clear();
                    } else {
                        omega *= 0.5;
                    }
                    continue;
                }
            } else {
                failures = 0;
            }
            let g_trial = g_trial.expect("finite defect implies an evaluation");
            let f_trial = self.flatten(&g_trial) - &trial;
            if opts.anderson > 0 {
                history.push_back((&trial - &x, &f_trial - &f));
                if history.len() > opts.anderson {
                    history.pop_front();
                }
            }
            x = trial;
            f = f_trial;
            defect = d_trial;
            if opts.adaptive && ratio < 0.5 {
                omega = (omega * 1.5).min(opts.relaxation);
            }
        }
        Ok(Solved { states: self.unflatten(&x), defect, iterations: k, log })
    }

    /// Sampled local Lipschitz constant of the source map in the `H` norm.
    pub fn lipschitz(&self, ys: &[DMatrix<f64>]) -> Result<f64> {
        if self.is_linear() {
            return Ok(0.0);
        }
        let m = self.len();
        let stride = (m / 16).max(1);
        let dim = ys[0].nrows();
        let mut worst: f64 = 0.0;
        for i in (0..m).step_by(stride) {
            let base = self.source(i, &ys[i])?;
            let scale = 1e-6 * (1.0 + self.h_norm(&ys[i]));
            for k in 0..self.slots {
                let mut d = DMatrix::zeros(dim, 2);
                d[(k, 0)] = scale / self.weights[k];
                d[((k + i) % self.slots, 0)] += 0.5 * scale / self.weights[(k + i) % self.slots];
                let moved = self.source(i, &(&ys[i] + &d))?;
                worst = worst.max(self.h_norm(&(moved - &base)) / self.h_norm(&d));
            }
        }
        Ok(worst)
    }

    pub fn to_states(&self, ys: &[DMatrix<f64>]) -> Vec<RescaledState> {
        ys.iter()
            .zip(&self.table.tau_grid)
            .map(|(y, tau)| RescaledState::from_columns(*tau, self.table.alpha, &self.template, y))
            .collect()
    }

    pub fn trajectory(&self, solved: Solved) -> Result<SolutionTrajectory> {
        let lipschitz = self.lipschitz(&solved.states)?;
        Ok(SolutionTrajectory {
            states: self.to_states(&solved.states),
            defect: solved.defect,
            iterations: solved.iterations,
            log: solved.log,
            lipschitz,
            outer_defect: None,
        })
    }
}

pub(crate) fn check_table(problem: &NonlinearProblem, table: &DichotomyTable) -> Result<()> {
    if problem.n != table.n || problem.l_max != table.l_max || (problem.alpha - table.alpha).abs() > 1e-14 {
        return Err(Error::DimensionMismatch("problem and dichotomy table disagree on n, l_max or alpha".into()));
    }
    Ok(())
}

/// Solution bounded as `τ → -∞` with `P^u(log T) h̃(log T) = h̃_*`, by Picard iteration.
///
/// `h_star` is projected onto the range of `P^u` at the right end of the grid.
pub fn picard_bounded_ball(
    problem: &NonlinearProblem,
    h_star: &RescaledState,
    table: &DichotomyTable,
    tol: f64,
    max_iter: usize,
) -> Result<SolutionTrajectory> {
    picard_with_options(problem, h_star, table, &PicardOptions { tol, max_iter, ..PicardOptions::default() })
}

/// [`picard_bounded_ball`] with explicit relaxation settings.
pub fn picard_with_options(
    problem: &NonlinearProblem,
    h_star: &RescaledState,
    table: &DichotomyTable,
    opts: &PicardOptions,
) -> Result<SolutionTrajectory> {
    check_table(problem, table)?;
    if table.half_line != HalfLine::Minus {
        return Err(Error::InvalidArgument("ball problems need a minus half-line table".into()));
    }
    let engine = Engine::new(table, &problem.nonlinearity)?;
    let anchor = engine.unstable_coordinates(&h_star.to_columns());
    let solved = engine.iterate(&anchor, None, opts)?;
    engine.trajectory(solved)
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fitted_weights_integrate_exponential_polynomials() {
        let gl = gauss_legendre(16);
        let dt = 0.1;
        for kappa in [-3.0, 0.0, 0.7, 4.0] {
            // ∫_0^Δ e^{κ(s-Δ)} s² ds against nodes at 1, 0, -1 (values transported to the right end)
            let w = fitted_weights(kappa * dt, &[1.0, 0.0, -1.0], dt, &gl);
            let p = |s: f64| s * s;
            let approx: f64 =
                [1.0, 0.0, -1.0].iter().zip(&w).map(|(u, wj)| wj * (kappa * (u - 1.0) * dt).exp() * p(u * dt)).sum();
            let n = 20_000;
            let h = dt / n as f64;
            let g = |s: f64| (kappa * (s - dt)).exp() * p(s);
            let exact: f64 = (0..=n)
                .map(|k| {
                    let c = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    c * g(k as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((approx - exact).abs() < 1e-10 * exact.abs().max(1e-6), "{kappa}: {approx} {exact}");
        }
        let w = fitted_weights(0.0, &[1.0, 0.0], 1.0, &gl);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(-1.0, 0.0, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(*g.last().unwrap(), 0.0);
    }
}
