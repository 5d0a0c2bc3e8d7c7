//! Quick invariant suite behind the `verify` command.

use std::time::Instant;

use radial_dichotomy::dichotomy::{alpha_window, build_dichotomy, check_alpha, DichotomyConfig, Flavor, DEFAULT_GAP_TOL};
use radial_dichotomy::eigen::{scan_eigenvalues, EigenConfig};
use radial_dichotomy::nonlinear::{match_whole_space, NonlinearProblem, Nonlinearity};
use radial_dichotomy::oracles::{bessel_zero, Descriptor, ExactSolution, HarmonicSign};
use radial_dichotomy::ses::{ses_residual, PotentialSpec};
use radial_dichotomy::sphere::ModeIndex;

use crate::error::{CliError, Result};
use crate::output::{num, Artifacts};

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
}

fn grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn closed_form_projection() -> Result<f64> {
    let table = build_dichotomy(&DichotomyConfig::new(3, 0.5, 4, PotentialSpec::zero(), grid(-4.0, 0.0, 9)))?;
    let op = table.operator()?;
    let s = op.slots();
    let mut worst: f64 = 0.0;
    for tau in &table.tau_grid {
        let p = table.projection_matrix(*tau, Flavor::Unstable)?;
        for k in 0..s {
            let l = op.slot_degree(k) as f64;
            let d = 2.0 * l + 1.0;
            let expected = [(k, k, (l + 1.0) / d), (k, s + k, 1.0 / d), (s + k, k, l * (l + 1.0) / d), (s + k, s + k, l / d)];
            for (i, j, v) in expected {
                worst = worst.max((p[(i, j)] - v).abs());
            }
        }
    }
    Ok(worst)
}

fn projector_idempotence() -> Result<f64> {
    let potential = PotentialSpec::radial_polynomial(vec![0.0, 0.0, 1.0]);
    let table = build_dichotomy(&DichotomyConfig::new(3, 0.5, 2, potential, grid(-5.0, 0.0, 11)))?;
    let mut worst: f64 = 0.0;
    for tau in &table.tau_grid {
        let pu = table.projection_matrix(*tau, Flavor::Unstable)?;
        let ps = table.projection_matrix(*tau, Flavor::Stable)?;
        worst = worst.max((&pu * &pu - &pu).amax());
        let id = nalgebra::DMatrix::<f64>::identity(pu.nrows(), pu.ncols());
        worst = worst.max((pu + ps - id).amax());
    }
    Ok(worst)
}

fn bessel_spectrum() -> Result<f64> {
    let scan = scan_eigenvalues(&PotentialSpec::zero(), 1.0, (5.0, 25.0), 60, 1e-10, &EigenConfig::new(3, 0.5, 1))?;
    let expected = [bessel_zero(0, 1)?.powi(2), bessel_zero(1, 1)?.powi(2)];
    if scan.eigenvalues.len() != expected.len() {
        return Ok(f64::INFINITY);
    }
    Ok(scan.eigenvalues.iter().zip(expected).map(|(r, e)| (r.lambda - e).abs()).fold(0.0, f64::max))
}

fn alpha_logic() -> Result<f64> {
    let mut mismatches = 0;
    for n in 3..=5 {
        for k in 0..40 {
            let alpha = -1.0 + 0.1 * k as f64 + 0.013;
            if check_alpha(n, alpha, DEFAULT_GAP_TOL).is_err() {
                continue;
            }
            let expected = alpha > 0.0 && alpha < n as f64 - 2.0;
            if alpha_window(n, alpha)?.feasible != expected {
                mismatches += 1;
            }
        }
    }
    if check_alpha(3, 1.0, DEFAULT_GAP_TOL).is_ok() {
        mismatches += 1;
    }
    Ok(mismatches as f64)
}

fn harmonic_residual() -> Result<f64> {
    let radii = grid(0.5, 1.0, 4001);
    let mut worst: f64 = 0.0;
    for sign in [HarmonicSign::Plus, HarmonicSign::Minus] {
        let s = ExactSolution::new(3, 2, Descriptor::Harmonic { mode: ModeIndex::new(2, 1), sign })?;
        worst = worst.max(ses_residual(&s.trajectory(&radii)?, &s.potential())?);
    }
    Ok(worst)
}

fn liouville() -> Result<f64> {
    let problem = NonlinearProblem::new(3, 0.5, 1, PotentialSpec::zero(), Nonlinearity::zero()).with_grid(-3.0, 3.0, 0.1);
    let (minus, plus) = problem.half_line_tables()?;
    let sol = match_whole_space(&problem, &minus, &plus, 1e-12)?;
    Ok(sol.states.iter().map(|s| s.max_abs()).fold(0.0, f64::max))
}

pub fn run_suite(out: &mut Artifacts) -> Result<Vec<String>> {
    let suite: [(&'static str, fn() -> Result<f64>, f64); 6] = [
        ("closed-form projection", closed_form_projection, 1e-9),
        ("projector identities", projector_idempotence, 1e-8),
        ("bessel spectrum", bessel_spectrum, 1e-7),
        ("alpha window", alpha_logic, 0.5),
        ("harmonic residual", harmonic_residual, 1e-5),
        ("zero whole-space solution", liouville, 1e-10),
    ];
    let mut checks = Vec::new();
    let mut lines = Vec::new();
    for (name, f, threshold) in suite {
        let start = Instant::now();
        let value = f()?;
        let pass = value < threshold;
        lines.push(format!(
            "{} {name}: {value:.3e} (threshold {threshold:.1e}, {:.2} s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        ));
        checks.push(Check { name, value, threshold });
    }
    let rows = checks.iter().map(|c| {
        vec![c.name.to_string(), num(c.value), num(c.threshold), (c.value < c.threshold).to_string()]
    });
    out.csv("verify.csv", &["check", "value", "threshold", "pass"], rows)?;
    let failed = checks.iter().filter(|c| !(c.value < c.threshold)).count();
    if failed > 0 {
        for l in &lines {
            eprintln!("{l}");
        }
        return Err(CliError::Verification { failed, total: checks.len() });
    }
    Ok(lines)
}
