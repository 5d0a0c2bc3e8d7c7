//! Command orchestration.

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radial_dichotomy::dichotomy::{build_dichotomy, DichotomyConfig, DichotomyTable, Flavor};
use radial_dichotomy::eigen::{scan_eigenvalues, EigenConfig, EigenScanResult};
use radial_dichotomy::integrator::{integrate, IntegratorOptions};
use radial_dichotomy::nonlinear::{
    match_whole_space_from, solve_boundary_condition_from, uniform_grid, write_states_csv, NonlinearProblem,
    OuterOptions, PicardOptions, SolutionTrajectory,
};
use radial_dichotomy::oracles::{bessel_zero, manufactured_problem};
use radial_dichotomy::ses::{rescale_forward, rses_residual, RescaledState, SesOperator};
use radial_dichotomy::sphere::SphereField;

use crate::config::{Command, Domain, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{num, Artifacts, Plot};
use crate::verify;

/// Summary lines and the files a run produced.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let mut out = Artifacts::new(&cfg.output, &cfg.hash())?;
    let mut summary = vec![format!("command {} config-sha256 {}", cfg.command.name(), cfg.hash())];
    let result = match cfg.command {
        Command::Evolve => evolve(cfg, &mut out),
        Command::Dichotomy => dichotomy(cfg, &mut out),
        Command::EigenScan => eigen_scan(cfg, &mut out),
        Command::Nonlinear => nonlinear(cfg, &mut out),
        Command::LiouvilleDemo => liouville(cfg, &mut out),
        Command::Verify => verify::run_suite(&mut out),
    };
    summary.extend(result?);
    out.text("summary.txt", &(summary.join("\n") + "\n"))?;
    Ok(Report { summary, files: out.written })
}

fn integrator(cfg: &RunConfig) -> IntegratorOptions {
    IntegratorOptions { rtol: cfg.tolerances.rtol, atol: cfg.tolerances.atol, ..IntegratorOptions::default() }
}

fn ball_grid(cfg: &RunConfig) -> Result<Vec<f64>> {
    Ok(uniform_grid(cfg.tau_min, cfg.radius.ln(), cfg.grid.step)?)
}

fn fan_plot(title: &str, states: &[RescaledState]) -> Plot {
    let mut plot = Plot::new(title, "tau", "Re f coefficient");
    let Some(first) = states.first() else {
        return plot;
    };
    for (k, mode) in first.f.modes().iter().enumerate() {
        for c in 0..first.f.n_sys {
            let slot = k * first.f.n_sys + c;
            let points = states.iter().map(|s| (s.tau, s.f.coeffs[slot].re)).collect();
            plot = plot.with_series(format!("l={} m={} c={c}", mode.l, mode.m), points);
        }
    }
    plot
}

fn evolve(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<String>> {
    let potential = cfg.potential_spec()?;
    let op = SesOperator::new(cfg.n, cfg.alpha, cfg.beta, cfg.l_max, cfg.n_sys, potential.clone())?;
    let slots = op.slots();
    let (f, g) = if cfg.evolve.f.is_empty() && cfg.evolve.g.is_empty() {
        let f = vec![1.0; slots];
        let g = (0..slots).map(|k| op.slot_degree(k) as f64).collect();
        (f, g)
    } else {
        let pad = |v: &[f64]| (0..slots).map(|k| v.get(k).copied().unwrap_or(0.0)).collect::<Vec<_>>();
        (pad(&cfg.evolve.f), pad(&cfg.evolve.g))
    };
    let template = SphereField::zeros(cfg.n, cfg.l_max, cfg.n_sys);
    let f = SphereField::from_real(cfg.n, cfg.l_max, cfg.n_sys, &f)?;
    let g = SphereField::from_real(cfg.n, cfg.l_max, cfg.n_sys, &g)?;
    let grid = ball_grid(cfg)?;
    let start = RescaledState::new(grid[0], cfg.alpha, f, g)?;
    let mut y = start.to_columns();
    let sys = op.natural_system();
    let opts = integrator(cfg);
    let mut states = vec![start];
    for w in grid.windows(2) {
        integrate(&sys, &mut y, w[0], w[1], &opts)?;
        states.push(RescaledState::from_columns(w[1], cfg.alpha, &template, &y));
    }
    let residual = rses_residual(&states, &potential)?;
    out.csv_with("trajectory.csv", |w| write_states_csv(&states, w))?;
    out.text("trajectory.svg", &fan_plot("Rescaled trajectory", &states).render())?;
    Ok(vec![
        format!("samples {} on tau in [{}, {}]", states.len(), grid[0], grid[grid.len() - 1]),
        format!("second-order finite-difference residual of the samples {residual:.3e}"),
    ])
}

/// `P^u` of the unperturbed system in natural coordinates, when the limiting
/// blocks are diagonalizable.
fn closed_form_unstable(op: &SesOperator, n: usize) -> Option<DMatrix<f64>> {
    let s = op.slots();
    let mut p = DMatrix::zeros(2 * s, 2 * s);
    for k in 0..s {
        let l = op.slot_degree(k) as f64;
        let q = 2.0 - n as f64 - l;
        if (q - l).abs() < 1e-12 {
            return None;
        }
        let d = q - l;
        p[(k, k)] = q / d;
        p[(k, s + k)] = -1.0 / d;
        p[(s + k, k)] = l * q / d;
        p[(s + k, s + k)] = -l / d;
    }
    Some(p)
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

fn dichotomy(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<String>> {
    let mut dc = DichotomyConfig::new(cfg.n, cfg.alpha, cfg.l_max, cfg.potential_spec()?, ball_grid(cfg)?);
    dc.beta = cfg.beta;
    dc.n_sys = cfg.n_sys;
    dc.integrator = integrator(cfg);
    let table = build_dichotomy(&dc)?;
    let limit = closed_form_unstable(table.operator()?, cfg.n);
    let mut rows = Vec::new();
    let mut decay = Vec::new();
    let mut worst: f64 = 0.0;
    for tau in &table.tau_grid {
        let pu = table.projection_matrix(*tau, Flavor::Unstable)?;
        let ps = table.projection_matrix(*tau, Flavor::Stable)?;
        let dist = limit.as_ref().map(|p| (&pu - p).amax());
        if let Some(d) = dist {
            worst = worst.max(d);
            decay.push((*tau, d.max(1e-18).log10()));
        }
        rows.push(vec![
            num(*tau),
            num(spectral_norm(&pu)),
            num(spectral_norm(&ps)),
            dist.map(num).unwrap_or_default(),
        ]);
    }
    out.csv("projections.csv", &["tau", "pu_norm", "ps_norm", "closed_form_distance"], rows)?;
    out.text("table.json", &table.to_json()?)?;
    let norms: Vec<(f64, f64)> =
        table.tau_grid.iter().map(|t| (*t, spectral_norm(&table.projection_matrix(*t, Flavor::Unstable).unwrap()))).collect();
    let mut plot = Plot::new("Dichotomy projections", "tau", "log10 distance / norm").with_series("|P^u|", norms);
    if !decay.is_empty() {
        plot = plot.with_series("log10 |P^u - P^u_inf|", decay);
    }
    out.text("projection_decay.svg", &plot.render())?;
    let c = table.certificate();
    let mut lines = vec![
        format!("range dim {} kernel dim {}", table.range_dim(), table.kernel_dim()),
        format!("rates eta_u {:.4} eta_s {:.4} K {:.4} min angle {:.4}", c.eta_u, c.eta_s, c.k, c.min_angle),
    ];
    if limit.is_some() {
        lines.push(format!("max deviation of P^u from closed form {worst:.3e}"));
    }
    Ok(lines)
}

fn scan_rows(scan: &EigenScanResult) -> Vec<Vec<String>> {
    let blocks = scan.samples.first().map_or(0, |s| s.values.len());
    let mut ids = vec![vec![-1i64; blocks]; scan.samples.len()];
    let mut next = 0;
    for b in 0..blocks {
        for k in 0..scan.samples.len().saturating_sub(1) {
            if (scan.samples[k].values[b] > 0.0) != (scan.samples[k + 1].values[b] > 0.0) {
                ids[k][b] = next;
                next += 1;
            }
        }
    }
    let mut rows = Vec::new();
    for (k, s) in scan.samples.iter().enumerate() {
        for (b, v) in s.values.iter().enumerate() {
            let block = if scan.per_degree { b as i64 } else { -1 };
            rows.push(vec![num(s.lambda), num(*v), block.to_string(), ids[k][b].to_string()]);
        }
    }
    rows
}

fn eigen_scan(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<String>> {
    let potential = cfg.potential_spec()?;
    let mut ec = EigenConfig::new(cfg.n, cfg.alpha, cfg.l_max);
    ec.n_sys = cfg.n_sys;
    ec.integrator = integrator(cfg);
    let range = (cfg.scan.lambda_min, cfg.scan.lambda_max);
    let scan = scan_eigenvalues(&potential, cfg.radius, range, cfg.scan.steps, cfg.tolerances.refine, &ec)?;
    out.csv("scan.csv", &["lambda", "det", "block_l", "bracket_id"], scan_rows(&scan))?;
    let roots = scan.eigenvalues.iter().map(|r| {
        let l = r.degree.map_or(-1, |d| d as i64);
        vec![num(r.lambda), r.multiplicity.to_string(), l.to_string()]
    });
    out.csv("roots.csv", &["lambda", "multiplicity", "l"], roots)?;
    let blocks = scan.samples.first().map_or(0, |s| s.values.len());
    let mut plot = Plot::new("Eigenvalue detector", "lambda", "detector");
    for b in 0..blocks {
        let label = if scan.per_degree { format!("l = {b}") } else { "det".to_string() };
        plot = plot.with_series(label, scan.samples.iter().map(|s| (s.lambda, s.values[b])).collect());
    }
    out.text("determinant.svg", &plot.render())?;

    let mut lines = vec![format!(
        "{} distinct eigenvalues, {} counted with multiplicity in [{}, {}]",
        scan.eigenvalues.len(),
        scan.counted().len(),
        range.0,
        range.1
    )];
    for r in &scan.eigenvalues {
        let mut line = format!("lambda {:.10} multiplicity {}", r.lambda, r.multiplicity);
        if let Some(l) = r.degree {
            line.push_str(&format!(" degree {l}"));
            if cfg.n == 3 && potential.is_zero() {
                let nearest = (1..=40)
                    .filter_map(|k| bessel_zero(l, k).ok())
                    .map(|z| (z / cfg.radius).powi(2))
                    .map(|v| (v - r.lambda).abs())
                    .fold(f64::INFINITY, f64::min);
                line.push_str(&format!(" bessel deviation {nearest:.2e}"));
            }
        }
        lines.push(line);
    }
    Ok(lines)
}

fn outer_options(cfg: &RunConfig) -> OuterOptions {
    let mut o = OuterOptions::new(cfg.tolerances.outer);
    o.max_iter = cfg.tolerances.max_iter;
    o.picard = PicardOptions { tol: cfg.tolerances.picard, max_iter: cfg.tolerances.max_iter, ..o.picard };
    o
}

fn problem(cfg: &RunConfig) -> Result<NonlinearProblem> {
    Ok(NonlinearProblem::new(cfg.n, cfg.alpha, cfg.l_max, cfg.potential_spec()?, cfg.nonlinearity()?)
        .with_grid(cfg.tau_min, cfg.grid.tau_end, cfg.grid.step))
}

fn trajectory_lines(sol: &SolutionTrajectory) -> Vec<String> {
    let mut lines = vec![
        format!("picard iterations {} defect {:.3e}", sol.iterations, sol.defect),
        format!("sampled lipschitz constant {:.3e}", sol.lipschitz),
    ];
    if let Some(d) = sol.outer_defect {
        lines.push(format!("outer defect {d:.3e}"));
    }
    lines
}

fn nonlinear(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<String>> {
    let problem = problem(cfg)?;
    let opts = outer_options(cfg);
    let (sol, tables) = match cfg.nonlinear.domain {
        Domain::Ball => {
            let problem = problem.with_radius(cfg.radius);
            let table = problem.ball_table()?;
            let (_, sol) = solve_boundary_condition_from(&problem, &table, &cfg.nonlinear.boundary.condition(), None, &opts)?;
            (sol, vec![table])
        }
        Domain::WholeSpace => {
            let (minus, plus) = problem.half_line_tables()?;
            let sol = match_whole_space_from(&problem, &minus, &plus, None, &opts)?;
            (sol, vec![minus, plus])
        }
    };
    out.csv_with("trajectory.csv", |w| write_states_csv(&sol.states, w))?;
    out.text("iterations.log", &(sol.log_lines().join("\n") + "\n"))?;
    out.text("trajectory.svg", &fan_plot("Solution coefficients", &sol.states).render())?;
    let mut lines = trajectory_lines(&sol);
    if let (Some(name), Domain::Ball) = (&cfg.nonlinear.manufactured, cfg.nonlinear.domain) {
        let m = manufactured_problem(name, cfg.n, cfg.l_max)?;
        let exact = exact_states(&m.exact, &tables[0], cfg.alpha)?;
        lines.push(format!("max deviation from manufactured solution {:.3e}", sol.max_deviation(&exact)?));
    }
    Ok(lines)
}

fn exact_states(
    exact: &radial_dichotomy::oracles::ExactSolution,
    table: &DichotomyTable,
    alpha: f64,
) -> Result<Vec<RescaledState>> {
    table.tau_grid.iter().map(|tau| Ok(rescale_forward(&exact.trace(tau.exp())?, alpha)?)).collect()
}

fn liouville(cfg: &RunConfig, out: &mut Artifacts) -> Result<Vec<String>> {
    let mut demo = cfg.clone();
    demo.potential = crate::config::PotentialConfig::default();
    demo.nonlinear = Default::default();
    let problem = problem(&demo)?;
    let (minus, plus) = problem.half_line_tables()?;
    let opts = outer_options(cfg);
    let slots = minus.dim() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.liouville.seed);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for trial in 0..cfg.liouville.trials {
        let mut state = || -> Result<RescaledState> {
            let f: Vec<f64> = (0..slots).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..slots).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Ok(RescaledState::new(
                0.0,
                cfg.alpha,
                SphereField::from_real(cfg.n, cfg.l_max, cfg.n_sys, &f)?,
                SphereField::from_real(cfg.n, cfg.l_max, cfg.n_sys, &g)?,
            )?)
        };
        let (h1, h2) = (state()?, state()?);
        let sol = match_whole_space_from(&problem, &minus, &plus, Some((&h1, &h2)), &opts)?;
        let norm = sol.states.iter().map(RescaledState::max_abs).fold(0.0, f64::max);
        worst = worst.max(norm);
        rows.push(vec![trial.to_string(), num(h1.max_abs().max(h2.max_abs())), num(norm), num(sol.outer_defect.unwrap_or(0.0))]);
    }
    out.csv("liouville.csv", &["trial", "initial_norm", "solution_norm", "matching_defect"], rows)?;
    let holds = worst < cfg.liouville.threshold;
    let lines = vec![format!(
        "largest solution norm over {} starts {worst:.3e} (threshold {:.1e}): {}",
        cfg.liouville.trials,
        cfg.liouville.threshold,
        if holds { "only the zero solution" } else { "nonzero bounded solution found" }
    )];
    if !holds {
        return Err(CliError::Verification { failed: 1, total: 1 });
    }
    Ok(lines)
}
