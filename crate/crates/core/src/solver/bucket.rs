//! Bucket assignment and bucket aggregates.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::aggregation::accumulate_window;
use crate::hashing::StochasticPair;
use crate::instances::{PmVector, Rows, SplitFamily};
use crate::matrix::Matrix;
use crate::rng;

/// Slice of the expansion a round works on.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    pub family: &'a SplitFamily,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketState {
    /// Members of each x bucket.
    pub x_buckets: Vec<Vec<u32>>,
    pub y_buckets: Vec<Vec<u32>>,
    /// Signed bucket sums, one row per bucket.
    pub a: Matrix<i64>,
    pub b: Matrix<i64>,
    pub s_a: Vec<i8>,
    pub s_b: Vec<i8>,
}

impl BucketState {
    pub fn x_sizes(&self) -> Vec<f64> {
        self.x_buckets.iter().map(|b| b.len() as f64).collect()
    }

    pub fn y_sizes(&self) -> Vec<f64> {
        self.y_buckets.iter().map(|b| b.len() as f64).collect()
    }

    /// Total memberships; inputs times copies minus collapsed repeats.
    pub fn total_x(&self) -> usize {
        self.x_buckets.iter().map(|b| b.len()).sum()
    }
}

/// Adds input `u` to each bucket in `draws`, once per distinct bucket.
fn place(buckets: &mut [Vec<u32>], u: usize, draws: &mut Vec<usize>) {
    draws.sort_unstable();
    draws.dedup();
    for &b in draws.iter() {
        buckets[b].push(u as u32);
    }
}

/// `copies` independent uniform buckets per input.
pub fn assign_uniform(n: usize, bucket_count: usize, copies: usize, r: &mut rng::Rng) -> Vec<Vec<u32>> {
    let mut buckets = vec![Vec::new(); bucket_count];
    let mut draws = Vec::with_capacity(copies);
    for u in 0..n {
        draws.clear();
        draws.extend((0..copies).map(|_| r.gen_range(0..bucket_count)));
        place(&mut buckets, u, &mut draws);
    }
    buckets
}

fn sample_row(m: &Matrix<f64>, row: usize, r: &mut rng::Rng) -> usize {
    let mut u: f64 = r.gen();
    let q = m.cols();
    for (c, &v) in m.row(row).iter().enumerate() {
        if u < v {
            return c;
        }
        u -= v;
    }
    (0..q).rev().find(|&c| m.get(row, c) > 0.0).unwrap_or(q - 1)
}

/// Hashed buckets. Digit `l` of a bucket index redraws the symbol at
/// `coords[l]` through `Qx` for the first `N` levels and `Qy` for the
/// last `N`; `mirrored` swaps the two, which is how the y side is drawn.
pub fn assign_lsh(
    rows: &Rows,
    coords: &[usize],
    qp: &StochasticPair,
    mirrored: bool,
    copies: usize,
    r: &mut rng::Rng,
) -> Vec<Vec<u32>> {
    let q = qp.q();
    let levels = coords.len();
    let half = levels / 2;
    let bucket_count = q.pow(levels as u32);
    let mut buckets = vec![Vec::new(); bucket_count];
    let mut draws = Vec::with_capacity(copies);
    for u in 0..rows.len() {
        draws.clear();
        for _ in 0..copies {
            let mut idx = 0;
            for (l, &pos) in coords.iter().enumerate() {
                let first = l < half;
                let m = if first != mirrored { qp.qx() } else { qp.qy() };
                idx = idx * q + sample_row(m, rows.symbol(u, pos), r);
            }
            draws.push(idx);
        }
        place(&mut buckets, u, &mut draws);
    }
    buckets
}

/// Signed sums of the expanded members of every bucket.
pub fn aggregate(buckets: &[Vec<u32>], vectors: &[PmVector], w: Window<'_>, r: &mut rng::Rng) -> (Matrix<i64>, Vec<i8>) {
    let mut m = Matrix::zeros(buckets.len(), w.len);
    let signs: Vec<i8> = (0..buckets.len()).map(|_| if r.gen::<bool>() { 1 } else { -1 }).collect();
    for (i, members) in buckets.iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let row = m.row_mut(i);
        for &u in members {
            accumulate_window(row, &vectors[u as usize], w.family, w.start);
        }
        if signs[i] < 0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
    }
    (m, signs)
}

/// One round of uniform bucketing on both sides.
pub fn bucket_uniform(
    xs: &[PmVector],
    ys: &[PmVector],
    bucket_count: usize,
    copies: usize,
    w: Window<'_>,
    seed: u64,
) -> BucketState {
    let mut r = rng::stream(seed, 1);
    let x_buckets = assign_uniform(xs.len(), bucket_count, copies, &mut r);
    let y_buckets = assign_uniform(ys.len(), bucket_count, copies, &mut r);
    let (a, s_a) = aggregate(&x_buckets, xs, w, &mut r);
    let (b, s_b) = aggregate(&y_buckets, ys, w, &mut r);
    BucketState { x_buckets, y_buckets, a, b, s_a, s_b }
}

/// One round of hashed bucketing. `x_rows`/`y_rows` hold the raw symbols
/// the buckets are drawn from, `xs`/`ys` the `+-1` vectors that are summed.
#[allow(clippy::too_many_arguments)]
pub fn bucket_lsh(
    x_rows: &Rows,
    y_rows: &Rows,
    xs: &[PmVector],
    ys: &[PmVector],
    qp: &StochasticPair,
    coords: &[usize],
    copies: usize,
    w: Window<'_>,
    seed: u64,
) -> BucketState {
    let mut r = rng::stream(seed, 2);
    let x_buckets = assign_lsh(x_rows, coords, qp, false, copies, &mut r);
    let y_buckets = assign_lsh(y_rows, coords, qp, true, copies, &mut r);
    let (a, s_a) = aggregate(&x_buckets, xs, w, &mut r);
    let (b, s_b) = aggregate(&y_buckets, ys, w, &mut r);
    BucketState { x_buckets, y_buckets, a, b, s_a, s_b }
}
