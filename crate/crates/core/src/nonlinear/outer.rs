use nalgebra::{DMatrix, DVector};

use super::picard::{check_table, Engine, NonlinearProblem, PicardOptions, Solved};
use super::trajectory::SolutionTrajectory;
use crate::dichotomy::{DichotomyTable, HalfLine};
use crate::error::{Error, Result};
use crate::ses::RescaledState;

/// Boundary subspace `ℬ` at the outer radius, given as the kernel of a functional block.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// `f̃ = 0`
    Dirichlet,
    /// `g̃ = 0`
    Neumann,
    /// No condition.
    Whole,
    /// `M h̃ = 0` for a matrix acting on natural coordinates `(f̃, g̃)`.
    Annihilator(DMatrix<f64>),
}

impl BoundaryCondition {
    /// Functional block acting on natural coordinates of dimension `2 * slots`.
    pub fn matrix(&self, slots: usize) -> Result<DMatrix<f64>> {
        let d = 2 * slots;
        Ok(match self {
            Self::Dirichlet => DMatrix::from_fn(slots, d, |i, j| if i == j { 1.0 } else { 0.0 }),
            Self::Neumann => DMatrix::from_fn(slots, d, |i, j| if j == slots + i { 1.0 } else { 0.0 }),
            Self::Whole => DMatrix::zeros(0, d),
            Self::Annihilator(m) => {
                if m.ncols() != d {
                    return Err(Error::DimensionMismatch(format!("annihilator has {} columns, expected {d}", m.ncols())));
                }
                m.clone()
            }
        })
    }

    /// Euclidean norm of `M h̃` for a state.
    pub fn defect(&self, state: &RescaledState) -> Result<f64> {
        let cols = state.to_columns();
        Ok((self.matrix(cols.nrows() / 2)? * cols).norm())
    }
}

/// Settings of the outer quasi-Newton solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub picard: PicardOptions,
}

impl OuterOptions {
    pub fn new(tol: f64) -> Self {
        let picard = PicardOptions { tol: (tol * 1e-2).min(1e-10), ..PicardOptions::default() };
        Self { tol, max_iter: 40, fd_step: 1e-6, picard }
    }
}

const RCOND_MIN: f64 = 1e-13;

fn least_squares(j: &DMatrix<f64>, r: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if rcond < RCOND_MIN {
        return Err(Error::SingularJacobian { rcond });
    }
    svd.solve(r, 0.0).map_err(|_| Error::SingularJacobian { rcond })
}

/// Quasi-Newton with Broyden updates from an initial Jacobian, falling back to
/// a finite-difference Jacobian when a step fails to reduce the residual.
fn quasi_newton(
    mut x: DVector<f64>,
    mut jac: DMatrix<f64>,
    opts: &OuterOptions,
    mut f: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<(DVector<f64>, f64, usize)> {
    let mut r = f(&x)?;
    let mut norm = r.norm();
    let mut fresh = false;
    for it in 0..opts.max_iter {
        if norm < opts.tol {
            return Ok((x, norm, it));
        }
        let delta = -least_squares(&jac, &r)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..6 {
            let trial = &x + &delta * step;
            match f(&trial) {
                Ok(rt) if rt.norm() < norm => {
                    accepted = Some((trial, rt));
                    break;
                }
                Ok(_) | Err(Error::NonContraction { .. }) | Err(Error::Overflow { .. }) | Err(Error::MaxIterations { .. }) => {
                    step *= 0.5
                }
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((xn, rn)) => {
                let s = &xn - &x;
                let y = &rn - &r;
                let denom = s.dot(&s);
                if denom > 0.0 {
                    let corr = (y - &jac * &s) / denom;
                    jac += corr * s.transpose();
                }
                x = xn;
                r = rn;
                norm = r.norm();
                fresh = false;
            }
            None if !fresh => {
                jac = fd_jacobian(&x, &r, opts.fd_step, &mut f)?;
                fresh = true;
            }
            None => return Err(Error::Stagnation { defect: norm }),
        }
    }
    if norm < opts.tol {
        Ok((x, norm, opts.max_iter))
    } else {
        Err(Error::Stagnation { defect: norm })
    }
}

fn fd_jacobian(
    x: &DVector<f64>,
    r: &DVector<f64>,
    h: f64,
    f: &mut impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let mut jac = DMatrix::zeros(r.len(), x.len());
    for k in 0..x.len() {
        let step = h * (1.0 + x[k].abs());
        let mut xp = x.clone();
        xp[k] += step;
        let rp = f(&xp)?;
        jac.set_column(k, &((rp - r) / step));
    }
    Ok(jac)
}

fn real_column(m: &DMatrix<f64>) -> DVector<f64> {
    m.column(0).into_owned()
}

fn as_columns(x: &DVector<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(x.len(), 2);
    m.set_column(0, x);
    m
}

/// Finds `h̃_* ∈ R(P^u(log T))` whose bounded solution satisfies `ℬ` at the outer radius.
pub fn solve_boundary_condition(
    problem: &NonlinearProblem,
    table: &DichotomyTable,
    boundary: &BoundaryCondition,
    tol: f64,
) -> Result<(RescaledState, SolutionTrajectory)> {
    solve_boundary_condition_from(problem, table, boundary, None, &OuterOptions::new(tol))
}

/// [`solve_boundary_condition`] from an initial `h̃_*` with explicit settings.
///
/// The outer unknowns are the real parts of the range coordinates; data are
/// assumed real.
pub fn solve_boundary_condition_from(
    problem: &NonlinearProblem,
    table: &DichotomyTable,
    boundary: &BoundaryCondition,
    h_star0: Option<&RescaledState>,
    opts: &OuterOptions,
) -> Result<(RescaledState, SolutionTrajectory)> {
    check_table(problem, table)?;
    if table.half_line != HalfLine::Minus {
        return Err(Error::InvalidArgument("ball problems need a minus half-line table".into()));
    }
    let engine = Engine::new(table, &problem.nonlinearity)?;
    let m = engine.len();
    let e0 = match h_star0 {
        Some(h) => real_column(&engine.unstable_coordinates(&h.to_columns())),
        None => DVector::zeros(table.range_dim()),
    };
    let bmat = boundary.matrix(table.dim() / 2)?;
    if bmat.nrows() == 0 {
        let anchor = as_columns(&e0);
        let solved = engine.iterate(&anchor, None, &opts.picard)?;
        let h = engine.to_states(&[engine.unstable_state(&anchor)]).remove(0);
        let mut traj = engine.trajectory(solved)?;
        traj.outer_defect = Some(0.0);
        return Ok((h, traj));
    }
    let jac0 = &bmat * engine.unstable_state(&DMatrix::identity(table.range_dim(), table.range_dim()));
    let mut warm: Option<Solved> = None;
    let mut eval = |e: &DVector<f64>| -> Result<DVector<f64>> {
        let anchor = as_columns(e);
        let init = warm.as_ref().map(|w| w.states.clone());
        let solved = engine.iterate(&anchor, init, &opts.picard)?;
        let r = real_column(&(&bmat * &solved.states[m - 1]));
        warm = Some(solved);
        Ok(r)
    };
    let (e, defect, _) = quasi_newton(e0, jac0, opts, &mut eval)?;
    let anchor = as_columns(&e);
    let solved = engine.iterate(&anchor, warm.map(|w| w.states), &opts.picard)?;
    let h = engine.to_states(&[engine.unstable_state(&anchor)]).remove(0);
    let mut traj = engine.trajectory(solved)?;
    traj.outer_defect = Some(defect);
    Ok((h, traj))
}

/// Whole-space solution bounded at both ends, glued at `τ = 0`.
pub fn match_whole_space(
    problem: &NonlinearProblem,
    minus: &DichotomyTable,
    plus: &DichotomyTable,
    tol: f64,
) -> Result<SolutionTrajectory> {
    match_whole_space_from(problem, minus, plus, None, &OuterOptions::new(tol))
}

/// [`match_whole_space`] from initial data `h̃₁ ∈ R(P₋^u(0))`, `h̃₂ ∈ R(P₊^s(0))`.
pub fn match_whole_space_from(
    problem: &NonlinearProblem,
    minus: &DichotomyTable,
    plus: &DichotomyTable,
    init: Option<(&RescaledState, &RescaledState)>,
    opts: &OuterOptions,
) -> Result<SolutionTrajectory> {
    check_table(problem, minus)?;
    check_table(problem, plus)?;
    if minus.half_line != HalfLine::Minus || plus.half_line != HalfLine::Plus {
        return Err(Error::InvalidArgument("matching needs a minus and a plus half-line table".into()));
    }
    let (Some(&t_m), Some(&t_p)) = (minus.tau_grid.last(), plus.tau_grid.first()) else {
        return Err(Error::InvalidArgument("empty grid".into()));
    };
    if (t_m - t_p).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("half-line grids meet at {t_m} and {t_p}, not at one point")));
    }
    let em = Engine::new(minus, &problem.nonlinearity)?;
    let ep = Engine::new(plus, &problem.nonlinearity)?;
    let ku = minus.range_dim();
    let ks = plus.kernel_dim();
    let mut x0 = DVector::zeros(ku + ks);
    if let Some((h1, h2)) = init {
        x0.rows_mut(0, ku).copy_from(&real_column(&em.unstable_coordinates(&h1.to_columns())));
        x0.rows_mut(ku, ks).copy_from(&real_column(&ep.stable_coordinates(&h2.to_columns())));
    }
    let mut jac0 = DMatrix::zeros(minus.dim(), ku + ks);
    jac0.columns_mut(0, ku).copy_from(&em.unstable_state(&DMatrix::identity(ku, ku)));
    jac0.columns_mut(ku, ks).copy_from(&(-ep.stable_state(&DMatrix::identity(ks, ks))));
    let mm = em.len();
    let mut warm: Option<(Solved, Solved)> = None;
    let mut eval = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let a1 = as_columns(&x.rows(0, ku).into_owned());
        let a2 = as_columns(&x.rows(ku, ks).into_owned());
        let (i1, i2) = match &warm {
            Some((s1, s2)) => (Some(s1.states.clone()), Some(s2.states.clone())),
            None => (None, None),
        };
        let s1 = em.iterate(&a1, i1, &opts.picard)?;
        let s2 = ep.iterate(&a2, i2, &opts.picard)?;
        let r = real_column(&(&s1.states[mm - 1] - &s2.states[0]));
        warm = Some((s1, s2));
        Ok(r)
    };
    let (x, defect, _) = quasi_newton(x0, jac0, opts, &mut eval)?;
    let a1 = as_columns(&x.rows(0, ku).into_owned());
    let a2 = as_columns(&x.rows(ku, ks).into_owned());
    let (i1, i2) = match warm {
        Some((s1, s2)) => (Some(s1.states), Some(s2.states)),
        None => (None, None),
    };
    let left = em.trajectory(em.iterate(&a1, i1, &opts.picard)?)?;
    let right = ep.trajectory(ep.iterate(&a2, i2, &opts.picard)?)?;
    let mut states = left.states;
    states.extend(right.states.into_iter().skip(1));
    let mut log = left.log;
    log.extend(right.log);
    Ok(SolutionTrajectory {
        states,
        defect: left.defect.max(right.defect),
        iterations: left.iterations + right.iterations,
        log,
        lipschitz: left.lipschitz.max(right.lipschitz),
        outer_defect: Some(defect),
    })
}
