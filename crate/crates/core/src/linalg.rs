//! Small dense linear algebra for the q x q matrices that show up in the
//! efficacy calculus. Sizes here never exceed a few dozen, so plain Gaussian
//! elimination with partial pivoting is enough.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pivots below `SINGULAR_TOL * max|entry|` count as zero.
pub const SINGULAR_TOL: f64 = 1e-10;

pub fn determinant(a: &Matrix<f64>) -> Result<f64> {
    if a.rows() != a.cols() {
        return Err(Error::shape("square matrix", alloc::format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| libm::fabs(m.get(x, col)).total_cmp(&libm::fabs(m.get(y, col))))
            .unwrap_or(col);
        let p = m.get(pivot, col);
        if p == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            swap_rows(&mut m, pivot, col);
            det = -det;
        }
        det *= p;
        for r in col + 1..n {
            let f = m.get(r, col) / p;
            for c in col..n {
                let v = m.get(r, c) - f * m.get(col, c);
                m.set(r, c, v);
            }
        }
    }
    Ok(det)
}

/// Inverse via Gauss-Jordan elimination. Fails on (numerically) singular
/// input.
pub fn inverse(a: &Matrix<f64>) -> Result<Matrix<f64>> {
    if a.rows() != a.cols() {
        return Err(Error::shape("square matrix", alloc::format!("{}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut inv = Matrix::<f64>::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| libm::fabs(m.get(x, col)).total_cmp(&libm::fabs(m.get(y, col))))
            .unwrap_or(col);
        let p = m.get(pivot, col);
        if libm::fabs(p) <= SINGULAR_TOL * scale {
            return Err(Error::domain("matrix is singular"));
        }
        swap_rows(&mut m, pivot, col);
        swap_rows(&mut inv, pivot, col);
        for c in 0..n {
            m.set(col, c, m.get(col, c) / p);
            inv.set(col, c, inv.get(col, c) / p);
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m.get(r, col);
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m.set(r, c, m.get(r, c) - f * m.get(col, c));
                inv.set(r, c, inv.get(r, c) - f * inv.get(col, c));
            }
        }
    }
    Ok(inv)
}

fn swap_rows(m: &mut Matrix<f64>, a: usize, b: usize) {
    if a == b {
        return;
    }
    for c in 0..m.cols() {
        let t = m.get(a, c);
        m.set(a, c, m.get(b, c));
        m.set(b, c, t);
    }
}
