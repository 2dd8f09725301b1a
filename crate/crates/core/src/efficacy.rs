//! Efficacy of a tensor: how well each output entry separates the planted
//! signal from aggregation noise.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EfficacyTable {
    /// `eff[i][j]`, row-major `qi x qj`.
    pub per_entry: Matrix<f64>,
    /// `sqrt(sum eff_ij^2)`.
    pub total: f64,
}

impl EfficacyTable {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.per_entry.get(i, j)
    }

    /// Entrywise squares, the matrix the hashing calculus works with.
    pub fn squared(&self) -> Matrix<f64> {
        self.per_entry.map(|e| e * e)
    }
}

/// Sum of the diagonal coefficients feeding `Z[i,j]`, and the sum of
/// squares of all coefficients feeding it.
fn entry_sums(t: &Tensor, i: usize, j: usize) -> (f64, f64) {
    let s = t.shape();
    let z = i * s.qj + j;
    let mut numer = 0.0;
    for k in 0..s.qk {
        numer += t.at(i * s.qk + k, j * s.qk + k, z);
    }
    let mut denom = 0.0;
    for x in 0..s.x_len() {
        for y in 0..s.y_len() {
            let c = t.at(x, y, z);
            denom += c * c;
        }
    }
    (numer, denom)
}

/// `eff_{i,j}(T)`; an all-zero `Z[i,j]` slice gives 0.
pub fn eff_entry(t: &Tensor, i: usize, j: usize) -> f64 {
    let (numer, denom) = entry_sums(t, i, j);
    if denom == 0.0 {
        0.0
    } else {
        numer / libm::sqrt(denom)
    }
}

pub fn eff_table(t: &Tensor) -> EfficacyTable {
    let s = t.shape();
    let per_entry = Matrix::from_fn(s.qi, s.qj, |i, j| eff_entry(t, i, j));
    let total = libm::sqrt(per_entry.data().iter().map(|e| e * e).sum());
    EfficacyTable { per_entry, total }
}

/// `log(rank) / log(eff)`, the running-time exponent a tensor certifies.
pub fn exponent_bound(rank: usize, eff: f64) -> Result<f64> {
    if !(eff > 1.0) {
        return Err(Error::domain(alloc::format!("efficacy {eff} must exceed 1 for an exponent bound")));
    }
    if rank == 0 {
        return Err(Error::domain("rank must be positive"));
    }
    Ok(libm::log(rank as f64) / libm::log(eff))
}

/// Distinct values of a table, largest first, merging values closer than
/// `tol` relative to the largest.
pub fn distinct_values(table: &Matrix<f64>, tol: f64) -> Vec<f64> {
    let mut vals: Vec<f64> = table.data().to_vec();
    vals.sort_by(|a, b| b.total_cmp(a));
    let scale = vals.first().map(|v| libm::fabs(*v)).unwrap_or(1.0).max(1.0);
    let mut out: Vec<f64> = vec![];
    for v in vals {
        if out.last().map_or(true, |last| libm::fabs(last - v) > tol * scale) {
            out.push(v);
        }
    }
    out
}
