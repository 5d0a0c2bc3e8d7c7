//! Small dense linear-algebra helpers shared by the dichotomy machinery.

use nalgebra::{DMatrix, DVector};

/// Thin QR by twice-iterated modified Gram-Schmidt.
///
/// Returns `(q, r)` with `y = q r`, orthonormal columns in `q` and a
/// non-negative diagonal in `r`. Columns with disjoint support stay exactly
/// decoupled, which keeps block-structured frames block-structured.
pub fn mgs_qr(y: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (rows, cols) = y.shape();
    let mut q = y.clone();
    let mut r = DMatrix::<f64>::zeros(cols, cols);
    for j in 0..cols {
        for _pass in 0..2 {
            for i in 0..j {
                let mut dot = 0.0;
                for k in 0..rows {
                    dot += q[(k, i)] * q[(k, j)];
                }
                if dot != 0.0 {
                    r[(i, j)] += dot;
                    for k in 0..rows {
                        let v = q[(k, i)];
                        q[(k, j)] -= dot * v;
                    }
                }
            }
        }
        let norm = q.column(j).norm();
        r[(j, j)] = norm;
        if norm > 0.0 {
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    (q, r)
}

/// Condition number of the Gram matrix `yᵀy`, from the extreme singular values of `y`.
pub fn gram_condition(y: &DMatrix<f64>) -> f64 {
    if y.ncols() == 0 {
        return 1.0;
    }
    let sv = y.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        (max / min).powi(2)
    }
}

/// Smallest principal angle between the column spans of two matrices with
/// orthonormal columns.
pub fn min_principal_angle(u: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    if u.ncols() == 0 || s.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let (small, big) = if s.ncols() <= u.ncols() { (s, u) } else { (u, s) };
    let residual = small - big * (big.transpose() * small);
    let sin = residual.singular_values().min().min(1.0);
    if sin < 0.7 {
        sin.asin()
    } else {
        let cos = (u.transpose() * s).singular_values().max().min(1.0);
        cos.acos()
    }
}

/// Largest principal angle between `span(x)` and the orthonormal frame `q`
/// (the angle of the worst-approximated direction in `x`).
pub fn subspace_angle(x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let (qx, _) = mgs_qr(x);
    let mut worst = 0.0f64;
    for j in 0..qx.ncols() {
        let col = qx.column(j).into_owned();
        worst = worst.max(vector_angle(&col, q));
    }
    worst
}

/// Angle between a vector and the span of an orthonormal frame.
pub fn vector_angle(x: &DVector<f64>, q: &DMatrix<f64>) -> f64 {
    let norm = x.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let coeffs = q.transpose() * x;
    let residual = x - q * &coeffs;
    (residual.norm() / norm).min(1.0).asin()
}

/// Solve an upper-triangular system in place of a copy.
pub fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = r.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    x
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}
