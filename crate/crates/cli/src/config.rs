//! Run configuration read from TOML.

use std::path::PathBuf;

use radial_dichotomy::dichotomy::{check_alpha, DEFAULT_GAP_TOL};
use radial_dichotomy::nonlinear::{BoundaryCondition, Nonlinearity};
use radial_dichotomy::oracles::{manufactured_problem, ManufacturedProblem};
use radial_dichotomy::ses::PotentialSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evolve,
    Dichotomy,
    EigenScan,
    Nonlinear,
    LiouvilleDemo,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Evolve => "evolve",
            Self::Dichotomy => "dichotomy",
            Self::EigenScan => "eigen-scan",
            Self::Nonlinear => "nonlinear",
            Self::LiouvilleDemo => "liouville-demo",
            Self::Verify => "verify",
        }
    }
}

/// Potential `V(t)` as written in the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero {},
    Constant { value: f64 },
    /// `Σ coeffs[k] t^k`
    Polynomial { coeffs: Vec<f64> },
    /// Piecewise linear samples.
    Table { t: Vec<f64>, v: Vec<f64> },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self::Zero {}
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec> {
        Ok(match self {
            Self::Zero {} => PotentialSpec::zero(),
            Self::Constant { value } => PotentialSpec::constant(*value),
            Self::Polynomial { coeffs } => PotentialSpec::radial_polynomial(coeffs.clone()),
            Self::Table { t, v } => PotentialSpec::radial_table(t.clone(), v.clone())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub step: f64,
    /// Right end of the plus half line for whole-space problems.
    pub tau_end: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { step: 0.05, tau_end: 6.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub picard: f64,
    pub outer: f64,
    pub max_iter: usize,
    pub refine: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, picard: 1e-10, outer: 1e-9, max_iter: 200, refine: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { lambda_min: 1.0, lambda_max: 40.0, steps: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Ball,
    WholeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Dirichlet,
    Neumann,
    Whole,
}

impl Boundary {
    pub fn condition(self) -> BoundaryCondition {
        match self {
            Self::Dirichlet => BoundaryCondition::Dirichlet,
            Self::Neumann => BoundaryCondition::Neumann,
            Self::Whole => BoundaryCondition::Whole,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearConfig {
    pub domain: Domain,
    pub boundary: Boundary,
    /// `[coefficient, power]` pairs of `F(u) = Σ c u^p`.
    pub terms: Vec<(f64, u32)>,
    pub forcing: Option<PotentialConfig>,
    pub validity_bound: Option<f64>,
    /// Named manufactured problem; replaces `potential`, `terms` and `forcing`.
    pub manufactured: Option<String>,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            domain: Domain::Ball,
            boundary: Boundary::Dirichlet,
            terms: Vec::new(),
            forcing: None,
            validity_bound: None,
            manufactured: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Real `f̃` coefficients at `tau_min`, one per mode slot; missing entries are zero.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiouvilleConfig {
    pub trials: usize,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for LiouvilleConfig {
    fn default() -> Self {
        Self { trials: 20, seed: 7, threshold: 1e-10 }
    }
}

fn default_n_sys() -> usize {
    1
}

fn default_l_max() -> usize {
    4
}

fn default_radius() -> f64 {
    1.0
}

fn default_tau_min() -> f64 {
    -6.0
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub n: usize,
    /// Number of coupled equations.
    #[serde(default = "default_n_sys")]
    pub n_sys: usize,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    /// Outer radius `T`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_tau_min")]
    pub tau_min: f64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub potential: PotentialConfig,
    #[serde(default)]
    pub nonlinear: NonlinearConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub liouville: LiouvilleConfig,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
    (line, column)
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        CliError::Parse { line, column, message: e.message().trim().to_string() }
    })?;
    let problems = cfg.violations();
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Validation(problems))
    }
}

impl RunConfig {
    /// Human-readable list of violated preconditions.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(format!("n = {} but the domain dimension must be at least 2", self.n));
        }
        if self.n_sys == 0 {
            out.push("n_sys must be at least 1".into());
        }
        if self.n >= 2 {
            if let Err(e) = check_alpha(self.n, self.alpha, DEFAULT_GAP_TOL) {
                out.push(format!("spectral condition on alpha: {e}"));
            } else if matches!(self.command, Command::EigenScan) {
                let upper = self.n as f64 - 2.0;
                if !(self.alpha > 0.0 && self.alpha < upper) {
                    out.push(format!("eigen-scan needs 0 < alpha < n - 2 = {upper}, got alpha = {}", self.alpha));
                }
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            out.push(format!("radius must be positive and finite, got {}", self.radius));
        } else if !(self.tau_min < self.radius.ln()) {
            out.push(format!("tau grid not increasing: tau_min = {} is not below ln(radius) = {}", self.tau_min, self.radius.ln()));
        }
        if !(self.grid.step > 0.0) {
            out.push(format!("grid.step must be positive, got {}", self.grid.step));
        }
        if matches!(self.nonlinear.domain, Domain::WholeSpace) || matches!(self.command, Command::LiouvilleDemo) {
            if !(self.tau_min < 0.0 && self.grid.tau_end > 0.0) {
                out.push(format!(
                    "whole-space grids need tau_min < 0 < grid.tau_end, got {} and {}",
                    self.tau_min, self.grid.tau_end
                ));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [("rtol", t.rtol), ("atol", t.atol), ("picard", t.picard), ("outer", t.outer), ("refine", t.refine)] {
            if !(v > 0.0) {
                out.push(format!("tolerances.{name} must be positive, got {v}"));
            }
        }
        if t.max_iter == 0 {
            out.push("tolerances.max_iter must be at least 1".into());
        }
        let s = &self.scan;
        if !(s.lambda_min < s.lambda_max) || !s.lambda_min.is_finite() || !s.lambda_max.is_finite() {
            out.push(format!("scan range [{}, {}] is not increasing", s.lambda_min, s.lambda_max));
        }
        if s.steps < 2 {
            out.push("scan.steps must be at least 2".into());
        }
        if let Err(e) = self.potential.build() {
            out.push(format!("potential: {e}"));
        }
        if let Some(Err(e)) = self.nonlinear.forcing.as_ref().map(PotentialConfig::build) {
            out.push(format!("nonlinear.forcing: {e}"));
        }
        if let Some(name) = &self.nonlinear.manufactured {
            if !ManufacturedProblem::names().contains(&name.as_str()) {
                out.push(format!("unknown manufactured problem '{name}', known: {}", ManufacturedProblem::names().join(", ")));
            }
        }
        if self.nonlinear.terms.iter().any(|(_, p)| *p < 2) {
            out.push("nonlinear.terms powers must be at least 2".into());
        }
        if self.liouville.trials == 0 {
            out.push("liouville.trials must be at least 1".into());
        }
        out
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec> {
        match &self.nonlinear.manufactured {
            Some(name) if matches!(self.command, Command::Nonlinear) => {
                Ok(manufactured_problem(name, self.n, self.l_max)?.potential)
            }
            _ => self.potential.build(),
        }
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        if let Some(name) = &self.nonlinear.manufactured {
            return Ok(manufactured_problem(name, self.n, self.l_max)?.nonlinearity);
        }
        let mut f = Nonlinearity::polynomial(self.nonlinear.terms.clone());
        if let Some(forcing) = &self.nonlinear.forcing {
            f = f.with_forcing(forcing.build()?);
        }
        if let Some(bound) = self.nonlinear.validity_bound {
            f = f.with_validity_bound(bound);
        }
        Ok(f)
    }

    /// SHA-256 of the canonical serialization without the output directory, as lowercase hex.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let canonical = toml::to_string(&c).unwrap_or_default();
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
