use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ses::{rescale_inverse, RescaledState, TraceState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Sup over the grid of the `H` norm of `G(y) - y` at the trial iterate.
    pub update: f64,
    /// Defect of the trial iterate divided by the defect of the current one;
    /// `NaN` on the first iteration.
    pub ratio: f64,
    pub relaxation: f64,
    /// Whether the trial iterate replaced the current one.
    pub accepted: bool,
}

/// Solution samples on a `τ`-grid with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionTrajectory {
    pub states: Vec<RescaledState>,
    /// Sup over the grid of the integral-equation defect of `states`.
    pub defect: f64,
    pub iterations: usize,
    pub log: Vec<IterationRecord>,
    /// Sampled local Lipschitz constant of the rescaled source.
    pub lipschitz: f64,
    /// Boundary-condition or matching residual, when an outer solve ran.
    pub outer_defect: Option<f64>,
}

impl SolutionTrajectory {
    pub fn taus(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.tau).collect()
    }

    pub fn traces(&self) -> Vec<TraceState> {
        self.states.iter().map(rescale_inverse).collect()
    }

    /// Sup over common samples of `max |Δ coefficient|` against another sampled solution.
    pub fn max_deviation(&self, other: &[RescaledState]) -> Result<f64> {
        if other.len() != self.states.len() {
            return Err(Error::DimensionMismatch(format!(
                "trajectories have {} and {} samples",
                self.states.len(),
                other.len()
            )));
        }
        let mut worst: f64 = 0.0;
        for (a, b) in self.states.iter().zip(other) {
            worst = worst.max(a.sub(b)?.max_abs());
        }
        Ok(worst)
    }

    /// Trajectory CSV; see [`write_states_csv`].
    pub fn write_csv(&self, w: impl Write) -> std::io::Result<()> {
        write_states_csv(&self.states, w)
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.log
            .iter()
            .map(|r| format!(
                    "iteration={} defect={:.6e} ratio={:.4} relaxation={} accepted={}",
                    r.iteration, r.update, r.ratio, r.relaxation, r.accepted
                ))
            .collect()
    }
}

/// CSV with `tau` followed by interleaved real/imaginary parts of the `f̃`
/// coefficients, then those of `g̃`.
pub fn write_states_csv(states: &[RescaledState], mut w: impl Write) -> std::io::Result<()> {
    let Some(first) = states.first() else {
        return writeln!(w, "tau");
    };
    let mut header = vec!["tau".to_string()];
    for name in ["f", "g"] {
        for mode in first.f.modes() {
            for c in 0..first.f.n_sys {
                let tag = format!("{name}_{}_{}_{}", mode.l, mode.m, c);
                header.push(format!("{tag}_re"));
                header.push(format!("{tag}_im"));
            }
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![format!("{:.12e}", s.tau)];
        for field in [&s.f, &s.g] {
            for z in &field.coeffs {
                row.push(format!("{:.15e}", z.re));
                row.push(format!("{:.15e}", z.im));
            }
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
