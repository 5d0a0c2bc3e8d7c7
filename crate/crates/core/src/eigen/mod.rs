//! Dirichlet eigenvalues of `-Δ + V` on a ball, detected as the values of `λ`
//! for which the unstable subspace of the shifted system meets the Dirichlet
//! subspace at the boundary radius.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dichotomy::{build_dichotomy, DichotomyConfig, Flavor, SubspaceFrame};
use crate::error::{Error, Result};
use crate::integrator::IntegratorOptions;
use crate::ses::{PotentialSpec, TraceState};
use crate::sphere::degree_multiplicity;

/// Trace pairs with vanishing Dirichlet component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirichletSubspace;

impl DirichletSubspace {
    pub fn distance(&self, x: &TraceState) -> f64 {
        x.f.l2_norm()
    }

    pub fn contains(&self, x: &TraceState, tol: f64) -> bool {
        self.distance(x) <= tol
    }
}

#[derive(Debug, Clone)]
pub struct EigenConfig {
    pub n: usize,
    pub alpha: f64,
    pub l_max: usize,
    pub n_sys: usize,
    pub asymptotic_tol: f64,
    /// Singular-value threshold for counting multiplicities when `V` is not radial.
    pub multiplicity_tol: f64,
    pub integrator: IntegratorOptions,
}

impl EigenConfig {
    pub fn new(n: usize, alpha: f64, l_max: usize) -> Self {
        Self {
            n,
            alpha,
            l_max,
            n_sys: 1,
            asymptotic_tol: 1e-10,
            multiplicity_tol: 1e-6,
            integrator: IntegratorOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenRoot {
    pub lambda: f64,
    pub multiplicity: usize,
    pub degree: Option<usize>,
}

/// Detector values at one scan point: one per degree for radial `V`, a single
/// determinant otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub lambda: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenScanResult {
    pub eigenvalues: Vec<EigenRoot>,
    pub samples: Vec<ScanSample>,
    /// Whether `samples` hold per-degree values.
    pub per_degree: bool,
    pub lambda_range: (f64, f64),
    pub step: f64,
    pub refine_tol: f64,
}

impl EigenScanResult {
    /// Eigenvalues repeated according to multiplicity.
    pub fn counted(&self) -> Vec<f64> {
        self.eigenvalues.iter().flat_map(|r| std::iter::repeat(r.lambda).take(r.multiplicity)).collect()
    }
}

fn check_window(cfg: &EigenConfig) -> Result<()> {
    let upper = cfg.n as f64 - 2.0;
    if cfg.n < 3 || !(cfg.alpha > 0.0 && cfg.alpha < upper) {
        let gap = if cfg.alpha <= 0.0 { cfg.alpha } else { upper - cfg.alpha };
        return Err(Error::ForbiddenAlpha { n: cfg.n, alpha: cfg.alpha, gap, tol: 0.0 });
    }
    Ok(())
}

/// Unstable frame of the system for `V - λ` at `τ = ln t`.
pub fn unstable_frame(lambda: f64, potential: &PotentialSpec, t: f64, cfg: &EigenConfig) -> Result<SubspaceFrame> {
    check_window(cfg)?;
    if !(t > 0.0 && t.is_finite()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("need finite lambda and t > 0, got lambda = {lambda}, t = {t}")));
    }
    let tau = t.ln();
    let shifted = potential.clone().with_shift(-lambda);
    let mut dc = DichotomyConfig::new(cfg.n, cfg.alpha, cfg.l_max, shifted, vec![tau - 0.5, tau]);
    dc.n_sys = cfg.n_sys;
    dc.asymptotic_tol = cfg.asymptotic_tol;
    dc.integrator = cfg.integrator;
    dc.kernel = false;
    let table = build_dichotomy(&dc)?;
    let vectors = table.unstable.last().cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
    Ok(SubspaceFrame { tau, flavor: Flavor::Unstable, vectors })
}

fn f_block(frame: &SubspaceFrame) -> DMatrix<f64> {
    let half = frame.vectors.nrows() / 2;
    frame.vectors.rows(0, half).into_owned()
}

/// Determinant of the f-components of the orthonormal unstable frame at `ln t`.
pub fn evans_determinant(lambda: f64, potential: &PotentialSpec, t: f64, cfg: &EigenConfig) -> Result<f64> {
    let frame = unstable_frame(lambda, potential, t, cfg)?;
    let f = f_block(&frame);
    if f.nrows() != f.ncols() {
        return Err(Error::DimensionMismatch(format!("f-block is {}x{}", f.nrows(), f.ncols())));
    }
    Ok(f.determinant())
}

/// Per-degree detector values for a radial potential: the normalized Dirichlet
/// component of the one-dimensional unstable direction in each degree.
pub fn degree_determinants(lambda: f64, potential: &PotentialSpec, t: f64, cfg: &EigenConfig) -> Result<Vec<f64>> {
    if !potential.is_radial() {
        return Err(Error::InvalidArgument("per-degree detector needs a radial potential".into()));
    }
    let frame = unstable_frame(lambda, potential, t, cfg)?;
    let slots = frame.vectors.nrows() / 2;
    let mut out = Vec::with_capacity(cfg.l_max + 1);
    let mut slot = 0;
    for l in 0..=cfg.l_max {
        let f = frame.vectors[(slot, slot)];
        let g = frame.vectors[(slots + slot, slot)];
        out.push(f / f.hypot(g));
        slot += degree_multiplicity(cfg.n, l) * cfg.n_sys;
    }
    Ok(out)
}

/// Number of singular values of the f-component block below `tol`.
pub fn intersection_dimension(frame: &SubspaceFrame, _subspace: &DirichletSubspace, tol: f64) -> usize {
    if frame.dim() == 0 {
        return 0;
    }
    let f = f_block(frame);
    let sv = f.clone().svd(false, false).singular_values;
    let below = sv.iter().filter(|s| **s < tol).count();
    below + frame.dim().saturating_sub(f.nrows().min(f.ncols()))
}

enum Detector {
    Degree(usize),
    Full,
}

fn detect(det: &Detector, lambda: f64, potential: &PotentialSpec, t: f64, cfg: &EigenConfig) -> Result<f64> {
    match det {
        Detector::Degree(l) => {
            let mut local = cfg.clone();
            local.l_max = *l;
            Ok(*degree_determinants(lambda, potential, t, &local)?.last().unwrap())
        }
        Detector::Full => evans_determinant(lambda, potential, t, cfg),
    }
}

fn bisect(
    det: &Detector,
    mut lo: f64,
    mut hi: f64,
    mut d_lo: f64,
    potential: &PotentialSpec,
    t: f64,
    tol: f64,
    cfg: &EigenConfig,
) -> Result<f64> {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let d = detect(det, mid, potential, t, cfg)?;
        if d == 0.0 {
            return Ok(mid);
        }
        if (d > 0.0) == (d_lo > 0.0) {
            lo = mid;
            d_lo = d;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Sign-change scan of the detector over `steps` equally spaced samples of
/// `range`, refined by bisection to `refine_tol`.
pub fn scan_eigenvalues(
    potential: &PotentialSpec,
    t: f64,
    range: (f64, f64),
    steps: usize,
    refine_tol: f64,
    cfg: &EigenConfig,
) -> Result<EigenScanResult> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!("invalid lambda range [{lo}, {hi}]")));
    }
    if steps < 2 {
        return Err(Error::InvalidArgument("scan needs at least two samples".into()));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::InvalidArgument("refinement tolerance must be positive".into()));
    }
    check_window(cfg)?;
    let radial = potential.is_radial();
    let step = (hi - lo) / (steps - 1) as f64;
    let lambdas: Vec<f64> = (0..steps).map(|k| if k + 1 == steps { hi } else { lo + k as f64 * step }).collect();
    let samples: Vec<Vec<f64>> = lambdas
        .par_iter()
        .map(|&lam| {
            if radial {
                degree_determinants(lam, potential, t, cfg)
            } else {
                evans_determinant(lam, potential, t, cfg).map(|d| vec![d])
            }
        })
        .collect::<Result<_>>()?;

    let zero_tol = 1e-12;
    for (k, s) in [(0, &samples[0]), (steps - 1, &samples[steps - 1])] {
        if s.iter().any(|d| d.abs() < zero_tol) {
            return Err(Error::EndpointRoot { lambda: lambdas[k] });
        }
    }

    let blocks = samples[0].len();
    let brackets: Vec<(usize, usize)> = (0..blocks)
        .flat_map(|b| {
            let samples = &samples;
            (0..steps - 1).filter(move |&k| (samples[k][b] > 0.0) != (samples[k + 1][b] > 0.0)).map(move |k| (b, k))
        })
        .collect();

    let mut roots = brackets
        .par_iter()
        .map(|&(b, k)| -> Result<EigenRoot> {
            let det = if radial { Detector::Degree(b) } else { Detector::Full };
            let lambda = bisect(&det, lambdas[k], lambdas[k + 1], samples[k][b], potential, t, refine_tol, cfg)?;
            if radial {
                Ok(EigenRoot { lambda, multiplicity: degree_multiplicity(cfg.n, b) * cfg.n_sys, degree: Some(b) })
            } else {
                let frame = unstable_frame(lambda, potential, t, cfg)?;
                let m = intersection_dimension(&frame, &DirichletSubspace, cfg.multiplicity_tol).max(1);
                Ok(EigenRoot { lambda, multiplicity: m, degree: None })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let samples = lambdas.into_iter().zip(samples).map(|(lambda, values)| ScanSample { lambda, values }).collect();
    Ok(EigenScanResult { eigenvalues: roots, samples, per_degree: radial, lambda_range: range, step, refine_tol })
}
