//! Explicit hashing matrices that beat the uniform baseline.
//!
//! For a tensor made of a subset of matrix multiplication terms, gamma only
//! depends on the column-normalized matrices `N = Q / colsum(Q)` through
//! `C = Nx A Ny^T` with `A = eff^2`. The construction picks `Nx`, `Ny` so
//! that `C` is the average of `A` everywhere except a boosted entry at the
//! most likely symbol pair, then rescales columns to make `Q` stochastic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::efficacy::eff_table;
use crate::error::{Error, Result};
use crate::hashing::{gamma, JointDistribution, StochasticPair};
use crate::linalg;
use crate::matrix::Matrix;
use crate::tensor::Tensor;

/// Boost sizes tried, largest first.
pub const EPSILON_GRID: [f64; 16] = [
    0.1, 0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4, 5e-5, 2e-5, 1e-5, 5e-6, 2e-6, 1e-6,
];

const ZERO_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignCase {
    /// `A` diagonal: only one bucket carries the correction.
    Diagonal,
    /// The correction row of `A^-1` has entries of both signs.
    MixedSigns,
}

/// Every intermediate of the construction at one boost size.
#[derive(Clone, Debug)]
pub struct QConstruction {
    pub case: DesignCase,
    pub epsilon: f64,
    /// Most likely symbol pair; its entry of `C` gets the boost.
    pub boost: (usize, usize),
    /// Bucket whose column of `A` is shifted.
    pub bucket: usize,
    pub avg: f64,
    pub delta: f64,
    pub b: f64,
    /// Column scalings as solved; a zero marks a bucket the solution leaves
    /// empty.
    pub z_x: Vec<f64>,
    pub z_y: Vec<f64>,
    /// Mass given to empty x-buckets in `q_x` (rows renormalized after).
    pub empty_bucket_mass: f64,
    pub n_x: Matrix<f64>,
    pub n_y: Matrix<f64>,
    /// `Nx A Ny^T` as designed.
    pub c: Matrix<f64>,
    /// `prod C^P`, the gamma the design aims for.
    pub designed_gamma: f64,
    /// `Q = N diag(z)`, not yet validated.
    pub q_x: Matrix<f64>,
    pub q_y: Matrix<f64>,
}

#[derive(Clone, Debug)]
pub struct QDesign {
    pub pair: StochasticPair,
    pub epsilon: f64,
    /// Gamma of `pair` evaluated from its definition.
    pub gamma: f64,
    /// `eff^2 / q^2`, what uniform matrices achieve.
    pub baseline: f64,
    pub construction: QConstruction,
}

fn eff_squared(t: &Tensor) -> Result<Matrix<f64>> {
    let s = t.shape();
    if s.qi != s.qj {
        return Err(Error::shape("q_i = q_j", s));
    }
    if !t.is_subset_of_matmul() {
        return Err(Error::domain("tensor is not a subset of matrix multiplication"));
    }
    Ok(eff_table(t).squared())
}

fn is_diagonal(a: &Matrix<f64>) -> bool {
    let q = a.rows();
    (0..q).all(|i| (0..q).all(|j| i == j || libm::fabs(a.get(i, j)) <= ZERO_TOL))
}

fn has_mixed_signs(row: &[f64]) -> bool {
    row.iter().any(|v| *v > ZERO_TOL) && row.iter().any(|v| *v < -ZERO_TOL)
}

/// Row scalings `z` with `sum_u N[i,u] z_u = 1` for `N = 1/q + (x at row
/// i*, -x/(q-1) elsewhere)`, i.e. `sum z = q` and `sum x z = 0`.
///
/// Averages every vertex of that polytope: each opposite-sign pair
/// `(u1, u2)` and each `u0` with `x_u0 = 0`. For q = 2 this is the single
/// sign-pair vertex; for larger q it keeps every bucket in use, which the
/// designed `C` relies on.
fn row_scalings(x: &[f64]) -> Vec<f64> {
    let q = x.len();
    let qf = q as f64;
    let mut acc = vec![0.0; q];
    let mut count = 0usize;
    for u1 in 0..q {
        if libm::fabs(x[u1]) <= ZERO_TOL {
            acc[u1] += qf;
            count += 1;
            continue;
        }
        if x[u1] < 0.0 {
            continue;
        }
        for u2 in 0..q {
            if x[u2] < -ZERO_TOL {
                let (p, n) = (x[u1], -x[u2]);
                acc[u1] += qf * n / (p + n);
                acc[u2] += qf * p / (p + n);
                count += 1;
            }
        }
    }
    if count == 0 {
        // a single nonzero x (diagonal A) has no vertex; mirror the
        // printed solution: zero on the corrected bucket, q/(q-1) elsewhere
        return (0..q)
            .map(|u| if libm::fabs(x[u]) > ZERO_TOL { 0.0 } else { qf / (qf - 1.0) })
            .collect();
    }
    acc.iter().map(|v| v / count as f64).collect()
}

/// Builds the matrices for one boost size `epsilon` without checking that
/// they are valid.
pub fn q_construction(t: &Tensor, p: &JointDistribution, epsilon: f64) -> Result<QConstruction> {
    let a = eff_squared(t)?;
    let q = a.rows();
    if p.q() != q {
        return Err(Error::shape(q, p.q()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let qf = q as f64;
    let a_inv = linalg::inverse(&a)?;
    let boost = p.argmax();
    if !(p.get(boost.0, boost.1) > 1.0 / (qf * qf)) {
        return Err(Error::InvalidDistribution("P is uniform; no symbol pair to boost".into()));
    }
    let avg = a.data().iter().sum::<f64>() / (qf * qf);
    let col_avg: Vec<f64> = (0..q).map(|v| (0..q).map(|u| a.get(u, v)).sum::<f64>() / qf).collect();

    let case = if is_diagonal(&a) { DesignCase::Diagonal } else { DesignCase::MixedSigns };
    // The shifted bucket: a mixed-sign row of A^-1 when one exists, and the
    // smallest column average among those so that b stays nonnegative.
    let candidates: Vec<usize> = match case {
        DesignCase::Diagonal => (0..q).collect(),
        DesignCase::MixedSigns => (0..q).filter(|&m| has_mixed_signs(a_inv.row(m))).collect(),
    };
    let bucket = candidates
        .iter()
        .copied()
        .min_by(|&l, &r| col_avg[l].total_cmp(&col_avg[r]))
        .ok_or_else(|| Error::DesignerFailure("no row of A^-1 has entries of both signs".into()))?;

    let delta = qf * epsilon / (qf + 1.0);
    let x: Vec<f64> = a_inv.row(bucket).iter().map(|v| delta * v).collect();
    let (istar, jstar) = boost;
    let n_x = Matrix::from_fn(q, q, |i, u| if i == istar { 1.0 / qf + x[u] } else { 1.0 / qf - x[u] / (qf - 1.0) });
    let z_x = row_scalings(&x);

    let rest = qf * avg - col_avg[bucket];
    let b = (avg - col_avg[bucket] + epsilon / (qf + 1.0)) / rest;
    let n_y = Matrix::from_fn(q, q, |j, v| match (j == jstar, v == bucket) {
        (true, true) => 1.0,
        (true, false) => b,
        (false, true) => 0.0,
        (false, false) => (1.0 - b) / (qf - 1.0),
    });
    let z_rest = 1.0 / (1.0 - b);
    let z_y: Vec<f64> = (0..q).map(|v| if v == bucket { 1.0 - b * (qf - 1.0) * z_rest } else { z_rest }).collect();

    let c = n_x.matmul(&a)?.matmul(&n_y.transpose())?;
    let mut log_g = 0.0;
    for i in 0..q {
        for j in 0..q {
            if p.get(i, j) > 0.0 {
                log_g += p.get(i, j) * libm::log(c.get(i, j));
            }
        }
    }
    // An empty bucket makes its effQ 0/0. The designed C is the limit as
    // that bucket's mass goes to 0, so give it a sliver and renormalize.
    let empty_bucket_mass = if z_x.iter().any(|z| *z <= ZERO_TOL) { epsilon * epsilon } else { 0.0 };
    let mut q_x = Matrix::from_fn(q, q, |i, u| n_x.get(i, u) * z_x[u].max(empty_bucket_mass));
    for i in 0..q {
        let s: f64 = q_x.row(i).iter().sum();
        q_x.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    let q_y = Matrix::from_fn(q, q, |j, v| n_y.get(j, v) * z_y[v]);
    Ok(QConstruction {
        case,
        epsilon,
        boost,
        bucket,
        avg,
        delta,
        b,
        z_x,
        z_y,
        empty_bucket_mass,
        n_x,
        n_y,
        c,
        designed_gamma: libm::exp(log_g),
        q_x,
        q_y,
    })
}

/// Clamps round-off and checks that each row is a distribution.
fn to_stochastic(m: &Matrix<f64>) -> Option<Matrix<f64>> {
    let q = m.rows();
    let mut out = m.clone();
    for r in 0..q {
        for c in 0..q {
            let v = m.get(r, c);
            if !(v >= -ZERO_TOL && v <= 1.0 + ZERO_TOL) {
                return None;
            }
            out.set(r, c, v.clamp(0.0, 1.0));
        }
        let s: f64 = out.row(r).iter().sum();
        if libm::fabs(s - 1.0) > ZERO_TOL {
            return None;
        }
        for v in out.row_mut(r) {
            *v /= s;
        }
    }
    Some(out)
}

/// Runs the construction at the boost sizes of [`EPSILON_GRID`] not above
/// `max_epsilon` and returns the first valid pair whose gamma, evaluated
/// from the definition, beats the uniform baseline.
pub fn design_q_matrices(t: &Tensor, p: &JointDistribution, max_epsilon: f64) -> Result<QDesign> {
    let a = eff_squared(t)?;
    let q = a.rows() as f64;
    let baseline = a.data().iter().sum::<f64>() / (q * q);
    let mut last = "no boost size in the search grid";
    for &eps in EPSILON_GRID.iter().filter(|e| **e <= max_epsilon) {
        let k = q_construction(t, p, eps)?;
        let (Some(qx), Some(qy)) = (to_stochastic(&k.q_x), to_stochastic(&k.q_y)) else {
            last = "rows are not distributions at any boost size";
            continue;
        };
        let pair = StochasticPair::new(qx, qy)?;
        let g = match gamma(&pair, t, p) {
            Ok(g) => g,
            Err(_) => {
                last = "gamma vanishes on the constructed pair";
                continue;
            }
        };
        if g > baseline {
            return Ok(QDesign { pair, epsilon: eps, gamma: g, baseline, construction: k });
        }
        last = "gamma does not exceed the uniform baseline";
    }
    Err(Error::DesignerFailure(format!("{last} (baseline {baseline})")))
}

/// `(a + eps)^p (a - eps/(q^2-1))^(1-p) > a`: boosting one entry of an
/// average matrix at the expense of the rest pays off when `p > 1/q^2`.
pub fn boost_beats_average(a: f64, p: f64, q: usize, eps: f64) -> bool {
    let q2 = (q * q) as f64;
    let low = a - eps / (q2 - 1.0);
    low > 0.0 && libm::pow(a + eps, p) * libm::pow(low, 1.0 - p) > a
}

/// A column `j` of a nonnegative matrix such that every row with a nonzero
/// in column `j` has a second nonzero elsewhere. Exists whenever `a` has
/// full rank and some row has two nonzeros.
pub fn shared_support_column(a: &Matrix<f64>) -> Option<usize> {
    let q = a.cols();
    (0..q).find(|&j| {
        (0..a.rows()).all(|i| {
            libm::fabs(a.get(i, j)) <= ZERO_TOL || (0..q).any(|k| k != j && libm::fabs(a.get(i, k)) > ZERO_TOL)
        })
    })
}

/// Rows of `a^-1` holding entries of both signs. Moving column `j` of `a`
/// to the front moves row `j` of the inverse to the top, so these are the
/// column choices the construction can shift.
pub fn mixed_sign_rows(a: &Matrix<f64>) -> Result<Vec<usize>> {
    let inv = linalg::inverse(a)?;
    Ok((0..inv.rows()).filter(|&r| has_mixed_signs(inv.row(r))).collect())
}
