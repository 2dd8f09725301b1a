//! Bucket aggregates of expanded vectors.
//!
//! For a bucket of `g` short vectors, entry `j` of the aggregate is
//! `sum_i x_i'[S_j]` over the split subset family. The fast route writes
//! this as `M1 * M2` with `M1[S1, i] = x_i'[S1]` and `M2[i, S2] = x_i'[S2]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instances::{PmVector, SplitFamily};
use crate::matrix::Matrix;
use crate::tensor::ApplyOptions;
use crate::zoo::strassen_decomposition;

/// Rows of `M1` materialized at a time.
pub const MAX_TILE_ROWS: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct AggregationTask {
    pub vectors: Vec<PmVector>,
    /// Even subset size.
    pub r: usize,
    /// Output length, a multiple of the second half-family size for the
    /// fast route.
    pub m: usize,
}

/// Inner matrix product used by [`aggregate_fast`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Kernel {
    #[default]
    Classical,
    /// Recursive Strassen on zero-padded power-of-two blocks.
    Strassen,
}

/// Scalar multiplications spent, for comparing the two routes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AggStats {
    pub multiplications: u64,
}

impl AggregationTask {
    fn family(&self) -> Result<SplitFamily> {
        if self.vectors.is_empty() {
            return Err(Error::domain("aggregation needs at least one vector"));
        }
        let d = self.vectors[0].len();
        if self.vectors.iter().any(|v| v.len() != d) {
            return Err(Error::domain("aggregated vectors differ in length"));
        }
        if self.r < 2 || self.r % 2 != 0 {
            return Err(Error::domain(format!("subset size {} must be even", self.r)));
        }
        let fam = SplitFamily::new(0, d, self.r)?;
        if self.m > fam.len() {
            return Err(Error::domain(format!("m = {} exceeds the family size {}", self.m, fam.len())));
        }
        Ok(fam)
    }
}

/// Entry by entry: `X_j = sum_i prod_{l in S_j} x_i[l]`.
pub fn aggregate_naive(task: &AggregationTask) -> Result<(Vec<i64>, AggStats)> {
    let fam = task.family()?;
    let mut out = vec![0i64; task.m];
    let mut mults = 0u64;
    for (j, o) in out.iter_mut().enumerate() {
        let s = fam.subset(j);
        for x in &task.vectors {
            let mut p = 1i64;
            for &l in &s {
                p *= x.get(l) as i64;
            }
            *o += p;
            mults += s.len() as u64 - 1;
        }
    }
    Ok((out, AggStats { multiplications: mults }))
}

fn half_products<'a>(x: &'a PmVector, subsets: &'a [Vec<usize>]) -> impl Iterator<Item = i64> + 'a {
    subsets.iter().map(move |s| {
        let parity = s.iter().fold(0u8, |a, &l| a ^ x.bit(l));
        1 - 2 * parity as i64
    })
}

/// The `M1 * M2` route, tiled over rows of `M1`.
pub fn aggregate_fast(task: &AggregationTask, kernel: Kernel) -> Result<(Vec<i64>, AggStats)> {
    let fam = task.family()?;
    let (_, m2) = fam.halves();
    if task.m % m2 != 0 {
        return Err(Error::domain(format!("m = {} is not a multiple of the half-family size {m2}", task.m)));
    }
    let rows = task.m / m2;
    let g = task.vectors.len();
    let half = task.r / 2;
    let per_half = (half as u64).saturating_sub(1);
    let mut mults = 0u64;

    // M2 stored transposed: m2 x g
    let mut m2t = vec![0i64; m2 * g];
    for (i, x) in task.vectors.iter().enumerate() {
        for (s, v) in half_products(x, fam.second_half()).enumerate() {
            m2t[s * g + i] = v;
        }
    }
    mults += (m2 * g) as u64 * per_half;

    let mut out = vec![0i64; task.m];
    let mut start = 0;
    while start < rows {
        let tile = MAX_TILE_ROWS.min(rows - start);
        let subsets = &fam.first_half()[start..start + tile];
        let mut m1 = vec![0i64; tile * g];
        for (i, x) in task.vectors.iter().enumerate() {
            for (s, v) in half_products(x, subsets).enumerate() {
                m1[s * g + i] = v;
            }
        }
        mults += (tile * g) as u64 * per_half;
        let dst = &mut out[start * m2..(start + tile) * m2];
        mults += match kernel {
            Kernel::Classical => classical(&m1, &m2t, g, dst),
            Kernel::Strassen => strassen(&m1, &m2t, tile, m2, g, dst)?,
        };
        start += tile;
    }
    Ok((out, AggStats { multiplications: mults }))
}

/// `dst[a, b] = sum_i m1[a, i] * m2t[b, i]`.
fn classical(m1: &[i64], m2t: &[i64], g: usize, dst: &mut [i64]) -> u64 {
    let m2 = m2t.len() / g;
    for (a, row) in m1.chunks_exact(g).enumerate() {
        for (b, col) in m2t.chunks_exact(g).enumerate() {
            dst[a * m2 + b] = row.iter().zip(col).map(|(u, v)| u * v).sum();
        }
    }
    (m1.len() / g * m2 * g) as u64
}

fn strassen(m1: &[i64], m2t: &[i64], rows: usize, m2: usize, g: usize, dst: &mut [i64]) -> Result<u64> {
    let side = rows.max(m2).max(g).next_power_of_two();
    let levels = side.trailing_zeros() as usize;
    let a = Matrix::from_fn(side, side, |r, c| if r < rows && c < g { m1[r * g + c] } else { 0 });
    let b = Matrix::from_fn(side, side, |r, c| if r < m2 && c < g { m2t[r * g + c] } else { 0 });
    let s = strassen_decomposition();
    let (c, stats) = s.apply_power(levels, &a, &b, ApplyOptions::default())?;
    for r in 0..rows {
        dst[r * m2..(r + 1) * m2].copy_from_slice(&c.row(r)[..m2]);
    }
    Ok(stats.multiplications)
}

/// Adds entries `start..start + acc.len()` of the expansion of `x` to `acc`.
/// This is the per-member step of a bucket aggregate.
pub fn accumulate_window(acc: &mut [i64], x: &PmVector, fam: &SplitFamily, start: usize) {
    for (e, a) in acc.iter_mut().enumerate() {
        *a += fam.value(x, start + e) as i64;
    }
}
