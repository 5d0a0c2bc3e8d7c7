use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Laplace–Beltrami eigenfunction on `S^{n-1}`.
///
/// For `n = 3` the order `m` runs over `-l..=l` (real spherical harmonics;
/// negative orders carry the `sin(|m| φ)` factor). For `n = 2` the order is
/// a Fourier tag: `0` for the constant, `-1` for `sin(lθ)` and `+1` for
/// `cos(lθ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub l: usize,
    pub m: i64,
}

impl ModeIndex {
    pub fn new(l: usize, m: i64) -> Self {
        Self { l, m }
    }
}

pub(crate) fn check_dimension(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("harmonic basis implemented for n in {{2, 3}}, got n = {n}")))
    }
}

/// Eigenvalue `l(l + n - 2)` of `-Δ` on `S^{n-1}`.
pub fn lb_eigenvalue(n: i64, l: i64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("ambient dimension must be >= 2, got {n}")));
    }
    if l < 0 {
        return Err(Error::InvalidArgument(format!("degree must be >= 0, got {l}")));
    }
    Ok((l * (l + n - 2)) as f64)
}

pub(crate) fn eigenvalue(n: usize, l: usize) -> f64 {
    (l * (l + n - 2)) as f64
}

/// Number of basis functions of degree exactly `l`.
pub fn degree_multiplicity(n: usize, l: usize) -> usize {
    match (n, l) {
        (_, 0) => 1,
        (2, _) => 2,
        _ => 2 * l + 1,
    }
}

/// Canonical ordering of the truncated basis: by degree, then by order.
pub fn enumerate_modes(n: usize, l_max: usize) -> Vec<ModeIndex> {
    let mut modes = Vec::new();
    for l in 0..=l_max {
        if l == 0 {
            modes.push(ModeIndex::new(0, 0));
        } else if n == 2 {
            modes.push(ModeIndex::new(l, -1));
            modes.push(ModeIndex::new(l, 1));
        } else {
            let li = l as i64;
            modes.extend((-li..=li).map(|m| ModeIndex::new(l, m)));
        }
    }
    modes
}

pub fn mode_count(n: usize, l_max: usize) -> usize {
    (0..=l_max).map(|l| degree_multiplicity(n, l)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues() {
        assert_eq!(lb_eigenvalue(3, 2).unwrap(), 6.0);
        assert_eq!(lb_eigenvalue(3, 0).unwrap(), 0.0);
        assert_eq!(lb_eigenvalue(2, 4).unwrap(), 16.0);
        assert!(lb_eigenvalue(1, 2).is_err());
        assert!(lb_eigenvalue(3, -1).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(enumerate_modes(3, 2).len(), 9);
        assert_eq!(enumerate_modes(3, 0).len(), 1);
        assert_eq!(enumerate_modes(2, 1).len(), 3);
        for l in 0..7 {
            assert_eq!(enumerate_modes(3, l).len(), (l + 1) * (l + 1));
            assert_eq!(mode_count(3, l), (l + 1) * (l + 1));
            assert_eq!(mode_count(2, l), 2 * l + 1);
        }
    }

    #[test]
    fn ordering_is_strict() {
        for n in [2, 3] {
            let modes = enumerate_modes(n, 5);
            assert!(modes.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
