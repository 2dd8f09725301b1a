//! Scoring bucket pairs.
//!
//! Under the null every aggregate coordinate is a sum of independent
//! signs, so `Var C[z] = sum_{x,y} T(x,y,z)^2 |X_i(x)| |Y_j(y)|`. The
//! squared coefficients summed over the inner indices factor level by
//! level, which lets the variance of every output come out of one
//! Kronecker matrix-vector product on the outer product of bucket sizes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::matrix::Matrix;
use crate::exact::apply_levels_exact;
use crate::tensor::{kron_matvec, ApplyOptions, Decomposition, TensorShape};

use super::bucket::BucketState;

/// Per-level maps from bucket-size pairs to output variances.
#[derive(Clone, Debug)]
pub struct VarianceModel {
    /// `W[z, i * qj + j] = sum_{k,k'} T(X[i,k] Y[j,k'] Z[z])^2`.
    w: Vec<Matrix<f64>>,
    shapes: Vec<TensorShape>,
}

impl VarianceModel {
    pub fn new(levels: &[&Decomposition]) -> Result<Self> {
        let mut w = Vec::with_capacity(levels.len());
        let mut shapes = Vec::with_capacity(levels.len());
        for d in levels {
            let t = d.to_tensor()?;
            let s = t.shape();
            let mut m = Matrix::zeros(s.z_len(), s.qi * s.qj);
            for (x, y, z, c) in t.nonzeros() {
                let (i, j) = (x / s.qk, y / s.qk);
                let cell = m.get(z, i * s.qj + j);
                m.set(z, i * s.qj + j, cell + c * c);
            }
            w.push(m);
            shapes.push(s);
        }
        Ok(VarianceModel { w, shapes })
    }

    /// Null variance of every output entry, as a `rows_a x rows_b` matrix,
    /// given the bucket sizes of both sides.
    pub fn variances(&self, sx: &[f64], sy: &[f64]) -> Result<Matrix<f64>> {
        let n = self.shapes.len();
        let rows_a: usize = self.shapes.iter().map(|s| s.qi).product();
        let rows_b: usize = self.shapes.iter().map(|s| s.qj).product();
        // level-interleaved (i_1, j_1, i_2, j_2, ...) layout of sx (x) sy
        let pair_len: usize = self.shapes.iter().map(|s| s.qi * s.qj).product();
        let mut v = vec![0.0; pair_len];
        for (f, slot) in v.iter_mut().enumerate() {
            let (mut rest, mut i, mut j, mut ui, mut uj) = (f, 0, 0, 1, 1);
            for s in self.shapes.iter().rev() {
                let cell = rest % (s.qi * s.qj);
                rest /= s.qi * s.qj;
                i += (cell / s.qj) * ui;
                j += (cell % s.qj) * uj;
                ui *= s.qi;
                uj *= s.qj;
            }
            *slot = sx[i] * sy[j];
        }
        let mats: Vec<&Matrix<f64>> = self.w.iter().collect();
        let out = kron_matvec(&mats, &v)?;
        // out is indexed by interleaved (i'_1, j'_1, ...) z digits
        let mut var = Matrix::zeros(rows_a, rows_b);
        for (f, &val) in out.iter().enumerate() {
            let (mut rest, mut i, mut j, mut ui, mut uj) = (f, 0, 0, 1, 1);
            for s in self.shapes.iter().rev() {
                let cell = rest % (s.qi * s.qj);
                rest /= s.qi * s.qj;
                i += (cell / s.qj) * ui;
                j += (cell % s.qj) * uj;
                ui *= s.qi;
                uj *= s.qj;
            }
            var.set(i, j, val);
        }
        debug_assert_eq!(n, self.w.len());
        Ok(var)
    }
}

/// Everything one detection round produces.
#[derive(Clone, Debug)]
pub struct RoundScores {
    /// `C = A B^T` through the tensor.
    pub c: Matrix<f64>,
    pub variance: Matrix<f64>,
    /// `s_a[i] s_b[j] C[i,j] / sigma[i,j]`, 0 where the variance is 0.
    pub score: Matrix<f64>,
    /// `(bucket_i, bucket_j, score)` at or above the threshold.
    pub flags: Vec<(usize, usize, f64)>,
    pub multiplications: u64,
}

/// Applies the levels to the aggregates and standardizes every entry.
pub fn detect(
    state: &BucketState,
    levels: &[&Decomposition],
    model: &VarianceModel,
    detect_sigma: f64,
    cutoff: usize,
) -> Result<RoundScores> {
    let (c, stats) = apply_levels_exact(levels, &state.a, &state.b, ApplyOptions { cutoff })?;
    let variance = model.variances(&state.x_sizes(), &state.y_sizes())?;
    let mut score = Matrix::zeros(c.rows(), c.cols());
    let mut flags = Vec::new();
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let var = variance.get(i, j);
            if var <= 0.0 {
                continue;
            }
            let s = (state.s_a[i] * state.s_b[j]) as f64 * c.get(i, j) / libm::sqrt(var);
            score.set(i, j, s);
            if s >= detect_sigma {
                flags.push((i, j, s));
            }
        }
    }
    Ok(RoundScores { c, variance, score, flags, multiplications: stats.apply.multiplications })
}
