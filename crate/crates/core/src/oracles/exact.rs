use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bessel::{spherical_bessel, spherical_bessel_derivative};
use crate::error::{Error, Result};
use crate::nonlinear::{NonlinearEvaluator, Nonlinearity};
use crate::ses::{ses_residual, ses_residual_with_source, PotentialSpec, TraceState};
use crate::sphere::{check_dimension, ModeIndex, SphereField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HarmonicSign {
    /// `r^l Y`
    Plus,
    /// `r^{2-n-l} Y`
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Descriptor {
    Harmonic { mode: ModeIndex, sign: HarmonicSign },
    /// `j_l(√λ r) Y`, a solution of `Δu + λu = 0` (`n = 3`).
    BesselMode { mode: ModeIndex, lambda: f64 },
    /// `r^{2-n}`, `n >= 3`.
    Fundamental,
    /// `log r`, `n = 2`.
    LogMode,
    Manufactured(String),
}

/// A closed-form solution together with the basis its traces live in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub n: usize,
    pub l_max: usize,
    pub descriptor: Descriptor,
}

/// `√|S^{n-1}|`, the coefficient of the constant function 1 on the unit mode.
pub fn sphere_area_sqrt(n: usize) -> f64 {
    if n == 2 {
        (2.0 * PI).sqrt()
    } else {
        (4.0 * PI).sqrt()
    }
}

fn mode_pair(n: usize, l_max: usize, mode: ModeIndex, f: f64, g: f64, t: f64) -> Result<TraceState> {
    TraceState::new(t, SphereField::mode(n, l_max, mode, f)?, SphereField::mode(n, l_max, mode, g)?)
}

/// Trace of the harmonic `r^l Y` (plus) or `r^{2-n-l} Y` (minus) at radius `t`.
pub fn harmonic_trace(n: usize, l_max: usize, mode: ModeIndex, sign: HarmonicSign, t: f64) -> Result<TraceState> {
    ExactSolution::new(n, l_max, Descriptor::Harmonic { mode, sign })?.trace(t)
}

impl ExactSolution {
    pub fn new(n: usize, l_max: usize, descriptor: Descriptor) -> Result<Self> {
        check_dimension(n)?;
        match &descriptor {
            Descriptor::Harmonic { mode, sign } => {
                if mode.l > l_max {
                    return Err(Error::InvalidArgument(format!("degree {} exceeds l_max = {l_max}", mode.l)));
                }
                if n == 2 && mode.l == 0 && *sign == HarmonicSign::Minus {
                    return Err(Error::InvalidArgument("the decaying radial harmonic for n = 2 is the log mode".into()));
                }
            }
            Descriptor::BesselMode { mode, lambda } => {
                if n != 3 || mode.l > l_max || *lambda <= 0.0 {
                    return Err(Error::InvalidArgument("Bessel modes need n = 3, l <= l_max and λ > 0".into()));
                }
            }
            Descriptor::Fundamental if n < 3 => {
                return Err(Error::InvalidArgument("fundamental solution r^{2-n} needs n >= 3".into()));
            }
            Descriptor::LogMode if n != 2 => {
                return Err(Error::InvalidArgument("log mode is defined for n = 2".into()));
            }
            Descriptor::Manufactured(name) => {
                if !MANUFACTURED.contains(&name.as_str()) {
                    return Err(Error::UnknownProblem(name.clone()));
                }
            }
            _ => {}
        }
        Ok(Self { n, l_max, descriptor })
    }

    /// Radii on which the formula is a solution.
    pub fn valid_range(&self) -> (f64, f64) {
        match &self.descriptor {
            Descriptor::Manufactured(name) if name == "cubic-forced" => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    /// Potential the solution is written for.
    pub fn potential(&self) -> PotentialSpec {
        match &self.descriptor {
            Descriptor::BesselMode { lambda, .. } => PotentialSpec::constant(-lambda),
            Descriptor::Manufactured(name) if name == "gaussian-linear" => gaussian_potential(self.n),
            _ => PotentialSpec::zero(),
        }
    }

    pub fn trace(&self, t: f64) -> Result<TraceState> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::NotEvaluable { t, reason: "radius must be positive".into() });
        }
        let (lo, hi) = self.valid_range();
        if t <= lo || t > hi * (1.0 + 1e-12) {
            return Err(Error::NotEvaluable { t, reason: format!("outside validity range ({lo}, {hi}]") });
        }
        let (n, l_max) = (self.n, self.l_max);
        let c0 = sphere_area_sqrt(n);
        let origin = ModeIndex::new(0, 0);
        match &self.descriptor {
            Descriptor::Harmonic { mode, sign } => {
                let e = match sign {
                    HarmonicSign::Plus => mode.l as f64,
                    HarmonicSign::Minus => 2.0 - n as f64 - mode.l as f64,
                };
                mode_pair(n, l_max, *mode, t.powf(e), e * t.powf(e - 1.0), t)
            }
            Descriptor::BesselMode { mode, lambda } => {
                let k = lambda.sqrt();
                let f = spherical_bessel(mode.l, k * t);
                let g = k * spherical_bessel_derivative(mode.l, k * t);
                mode_pair(n, l_max, *mode, f, g, t)
            }
            Descriptor::Fundamental => {
                let e = 2.0 - n as f64;
                mode_pair(n, l_max, origin, c0 * t.powf(e), c0 * e * t.powf(e - 1.0), t)
            }
            Descriptor::LogMode => mode_pair(n, l_max, origin, c0 * t.ln(), c0 / t, t),
            Descriptor::Manufactured(name) => match name.as_str() {
                "gaussian-linear" => {
                    let u = (-t * t).exp();
                    mode_pair(n, l_max, origin, c0 * u, -2.0 * t * c0 * u, t)
                }
                "cubic-forced" => mode_pair(n, l_max, origin, c0 * (1.0 - t * t), -2.0 * t * c0, t),
                _ => Ok(TraceState::zeros(t, n, l_max, 1)),
            },
        }
    }

    pub fn trajectory(&self, radii: &[f64]) -> Result<Vec<TraceState>> {
        radii.iter().map(|t| self.trace(*t)).collect()
    }
}

const MANUFACTURED: [&str; 3] = ["gaussian-linear", "cubic-forced", "zero"];

fn gaussian_potential(n: usize) -> PotentialSpec {
    PotentialSpec::radial_polynomial(vec![-2.0 * n as f64, 0.0, 4.0])
}

/// Problem `Δu - Vu = F(x, u)` with known solution.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub name: String,
    pub potential: PotentialSpec,
    pub nonlinearity: Nonlinearity,
    pub exact: ExactSolution,
    /// Ball radius when the problem is posed on a ball.
    pub radius: Option<f64>,
}

/// Registered manufactured problems: `gaussian-linear`, `cubic-forced`, `zero`.
pub fn manufactured_problem(name: &str, n: usize, l_max: usize) -> Result<ManufacturedProblem> {
    let exact = ExactSolution::new(n, l_max, Descriptor::Manufactured(name.to_string()))?;
    let nf = n as f64;
    let (potential, nonlinearity, radius) = match name {
        "gaussian-linear" => (gaussian_potential(n), Nonlinearity::zero(), None),
        "cubic-forced" => {
            // h = -2n - (1 - r²)³
            let h = PotentialSpec::radial_polynomial(vec![-2.0 * nf - 1.0, 0.0, 3.0, 0.0, -3.0, 0.0, 1.0]);
            (PotentialSpec::zero(), Nonlinearity::polynomial(vec![(1.0, 3)]).with_forcing(h), Some(1.0))
        }
        _ => (PotentialSpec::zero(), Nonlinearity::polynomial(vec![(1.0, 3)]), None),
    };
    Ok(ManufacturedProblem { name: name.to_string(), potential, nonlinearity, exact, radius })
}

impl ManufacturedProblem {
    pub fn names() -> &'static [&'static str] {
        &MANUFACTURED
    }

    /// Relative trace-system residual of the exact solution sampled at `radii`.
    pub fn residual(&self, radii: &[f64]) -> Result<f64> {
        let traj = self.exact.trajectory(radii)?;
        if self.nonlinearity.is_zero() {
            return ses_residual(&traj, &self.potential);
        }
        let eval = NonlinearEvaluator::new(self.nonlinearity.clone(), self.exact.n, self.exact.l_max)?;
        ses_residual_with_source(&traj, &self.potential, |x| {
            let s = eval.evaluate(x.t.ln(), &x.f, 0.0)?;
            Ok(Some(s.scaled(1.0 / (x.t * x.t))))
        })
    }
}
