use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Membership in `Σ(n) = ((-∞, 2-n] ∪ [0, ∞)) ∩ ℤ`.
pub fn in_sigma(n: usize, k: i64) -> bool {
    k >= 0 || k <= 2 - n as i64
}

/// `dist(-α, Σ(n))`.
pub fn validate_alpha(n: usize, alpha: f64) -> f64 {
    let x = -alpha;
    let lower = 2.0 - n as f64;
    if x > lower && x < 0.0 {
        return (x - lower).min(-x);
    }
    let fl = x.floor();
    let ce = x.ceil();
    let mut best = f64::INFINITY;
    for k in [fl, ce] {
        if in_sigma(n, k as i64) {
            best = best.min((x - k).abs());
        }
    }
    best
}

pub fn check_alpha(n: usize, alpha: f64, tol: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ambient dimension must be >= 2, got {n}")));
    }
    let gap = validate_alpha(n, alpha);
    if gap > tol {
        Ok(gap)
    } else {
        Err(Error::ForbiddenAlpha { n, alpha, gap, tol })
    }
}

/// Rate bounds implied by the spectrum `α + Σ(n)` and the resulting window for `α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaWindow {
    /// Smallest positive element of `α + Σ(n)`; admissible `η^u` lie in `[0, eta_u_max)`.
    pub eta_u_max: f64,
    /// Distance from 0 to the largest negative element of `α + Σ(n)`.
    pub eta_s_max: f64,
    /// `-eta_s_max`.
    pub lower: f64,
    /// `eta_u_max + n/2 - 1`.
    pub upper: f64,
    /// Whether rates `η^u < eta_u_max`, `η^s < eta_s_max` exist with `-η^s < α < η^u + n/2 - 1`.
    pub feasible: bool,
}

pub fn alpha_window(n: usize, alpha: f64) -> Result<AlphaWindow> {
    check_alpha(n, alpha, 0.0)?;
    // α + Σ(n): positive part starts at the smallest k in Σ with α + k > 0
    let k_up = (-alpha).floor() as i64 + 1;
    let mut k = k_up;
    while !in_sigma(n, k) {
        k += 1;
    }
    let eta_u_max = alpha + k as f64;
    let mut j = (-alpha).ceil() as i64 - 1;
    while !in_sigma(n, j) {
        j -= 1;
    }
    let eta_s_max = -(alpha + j as f64);
    let lower = -eta_s_max;
    let upper = eta_u_max + n as f64 / 2.0 - 1.0;
    Ok(AlphaWindow { eta_u_max, eta_s_max, lower, upper, feasible: lower < alpha && alpha < upper })
}

/// Whether the measured rates `(η^u, η^s)` place `α` strictly inside the window.
pub fn rates_admit(n: usize, alpha: f64, eta_u: f64, eta_s: f64) -> bool {
    eta_u >= 0.0 && eta_s >= 0.0 && -eta_s < alpha && alpha < eta_u + n as f64 / 2.0 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps() {
        assert!((validate_alpha(3, 0.5) - 0.5).abs() < 1e-15);
        assert!((validate_alpha(4, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(validate_alpha(3, 1.0), 0.0);
        assert!((validate_alpha(3, 0.3) - 0.3).abs() < 1e-15);
        assert!((validate_alpha(5, 1.5) - 1.5).abs() < 1e-15);
        assert!((validate_alpha(5, 2.2) - 0.8).abs() < 1e-12);
        assert!(check_alpha(3, 1.0, DEFAULT_GAP_TOL).is_err());
    }

    #[test]
    fn windows() {
        let w = alpha_window(3, 0.5).unwrap();
        assert!((w.eta_u_max - 0.5).abs() < 1e-15 && (w.eta_s_max - 0.5).abs() < 1e-15);
        assert!(w.feasible);
        let w = alpha_window(2, 0.5).unwrap();
        assert!(!w.feasible);
        let w = alpha_window(4, 1.0).unwrap();
        assert!((w.eta_u_max - 1.0).abs() < 1e-15 && (w.eta_s_max - 1.0).abs() < 1e-15);
    }
}
