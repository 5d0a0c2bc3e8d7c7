use crate::error::{Error, Result};

/// Spherical Bessel function `j_l(x)` for `x >= 0`.
///
/// Upward recurrence for `x > l`, Miller's downward recurrence otherwise.
pub fn spherical_bessel(l: usize, x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    if x < 1e-6 {
        // leading term x^l / (2l+1)!!
        let mut v = 1.0;
        for k in 1..=l {
            v *= x / (2 * k + 1) as f64;
        }
        return v * (1.0 - x * x / (2.0 * (2 * l + 3) as f64));
    }
    let j0 = x.sin() / x;
    if l == 0 {
        return j0;
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if x > l as f64 {
        let (mut a, mut b) = (j0, j1);
        for k in 1..l {
            let c = (2 * k + 1) as f64 / x * b - a;
            a = b;
            b = c;
        }
        return b;
    }
    let start = l + 30 + x as usize + (10.0 * (l as f64).sqrt()) as usize;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut target = 0.0;
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for k in (1..=start).rev() {
        let mut prev = (2 * k + 1) as f64 / x * cur - next;
        next = cur;
        if prev.abs() > 1e250 {
            prev *= 1e-250;
            next *= 1e-250;
            target *= 1e-250;
            m1 *= 1e-250;
        }
        cur = prev;
        // cur now holds j_{k-1}
        if k - 1 == l {
            target = cur;
        }
        if k - 1 == 1 {
            m1 = cur;
        }
        if k - 1 == 0 {
            m0 = cur;
        }
    }
    if m0.abs() >= m1.abs() {
        target * j0 / m0
    } else {
        target * j1 / m1
    }
}

/// Derivative `j_l'(x)`.
pub fn spherical_bessel_derivative(l: usize, x: f64) -> f64 {
    if l == 0 {
        return -spherical_bessel(1, x);
    }
    if x == 0.0 {
        return if l == 1 { 1.0 / 3.0 } else { 0.0 };
    }
    spherical_bessel(l - 1, x) - (l + 1) as f64 / x * spherical_bessel(l, x)
}

/// `k`-th positive zero of `j_l` (`k >= 1`), by scanning for a sign change and bisecting.
pub fn bessel_zero(l: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("zero index k starts at 1".into()));
    }
    let step = 0.05;
    let limit = l as f64 + (k as f64 + 10.0) * std::f64::consts::PI;
    let mut a = step;
    let mut fa = spherical_bessel(l, a);
    let mut found = 0;
    while a < limit {
        let b = a + step;
        let fb = spherical_bessel(l, b);
        if fa == 0.0 || fa.signum() != fb.signum() {
            found += 1;
            if found == k {
                return Ok(bisect(l, a, b));
            }
        }
        a = b;
        fa = fb;
    }
    Err(Error::BracketNotFound { l, k })
}

fn bisect(l: usize, mut a: f64, mut b: f64) -> f64 {
    let mut fa = spherical_bessel(l, a);
    if fa == 0.0 {
        return a;
    }
    while b - a > 1e-15 * b.max(1.0) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = spherical_bessel(l, m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn closed_forms() {
        for x in [0.1, 0.7, 2.0, 9.3, 25.0] {
            assert!((spherical_bessel(0, x) - x.sin() / x).abs() < 1e-15);
            let j1 = x.sin() / (x * x) - x.cos() / x;
            assert!((spherical_bessel(1, x) - j1).abs() < 1e-14);
            let j2 = (3.0 / (x * x) - 1.0) * x.sin() / x - 3.0 * x.cos() / (x * x);
            assert!((spherical_bessel(2, x) - j2).abs() < 1e-13);
        }
        assert!(spherical_bessel(0, PI).abs() < 1e-15);
    }

    #[test]
    fn regimes_agree() {
        // x just below and above l switches recurrences
        for l in [3usize, 8, 15] {
            let a = spherical_bessel(l, l as f64 - 1e-13);
            let b = spherical_bessel(l, l as f64 + 1e-13);
            assert!((a - b).abs() < 1e-11 * a.abs());
        }
    }

    #[test]
    fn zeros() {
        assert!((bessel_zero(0, 1).unwrap() - PI).abs() < 1e-12);
        assert!((bessel_zero(0, 2).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((bessel_zero(1, 1).unwrap() - 4.493409457909064).abs() < 1e-12);
        assert!(bessel_zero(0, 0).is_err());
    }
}
