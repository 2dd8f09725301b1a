//! Efficacy under locality-sensitive bucketing.
//!
//! A pair of row-stochastic matrices `(Qx, Qy)` describes how an input
//! symbol is redrawn into a bucket symbol, independently per coordinate.
//! `effQ` rescales efficacy by how much bucket mass each symbol attracts
//! (the column sums of `Q`), and `gamma` scores a pair against a joint
//! distribution `P` of the planted symbols.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;
use crate::tensor::Tensor;

/// Row sums of stochastic matrices must hit 1 within this.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    p: Matrix<f64>,
}

impl JointDistribution {
    pub fn new(p: Matrix<f64>) -> Result<Self> {
        if p.rows() != p.cols() || p.rows() < 2 {
            return Err(Error::InvalidDistribution(format!("P must be square with q >= 2, got {}x{}", p.rows(), p.cols())));
        }
        if p.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidDistribution("P has a negative or non-finite entry".into()));
        }
        let total: f64 = p.data().iter().sum();
        if libm::fabs(total - 1.0) > 1e-9 {
            return Err(Error::InvalidDistribution(format!("P sums to {total}, not 1")));
        }
        Ok(JointDistribution { p })
    }

    /// The classic light bulb law: equal symbols with probability `(1+rho)/2`.
    pub fn rho(rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidDistribution(format!("correlation {rho} outside [-1, 1]")));
        }
        let (s, d) = ((1.0 + rho) / 4.0, (1.0 - rho) / 4.0);
        Self::new(Matrix::from_vec(2, 2, vec![s, d, d, s])?)
    }

    pub fn uniform(q: usize) -> Result<Self> {
        let v = 1.0 / (q * q) as f64;
        Self::new(Matrix::from_fn(q, q, |_, _| v))
    }

    pub fn q(&self) -> usize {
        self.p.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p.get(i, j)
    }

    pub fn matrix(&self) -> &Matrix<f64> {
        &self.p
    }

    pub fn is_uniform(&self) -> bool {
        let u = 1.0 / (self.q() * self.q()) as f64;
        self.p.data().iter().all(|v| libm::fabs(v - u) <= 1e-12)
    }

    pub fn is_symmetric(&self) -> bool {
        let q = self.q();
        (0..q).all(|i| (0..q).all(|j| libm::fabs(self.get(i, j) - self.get(j, i)) <= 1e-12))
    }

    /// Position of the largest entry (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let q = self.q();
        let mut best = (0, 0);
        for i in 0..q {
            for j in 0..q {
                if self.get(i, j) > self.get(best.0, best.1) {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// Draws one symbol pair.
    pub fn sample(&self, r: &mut rng::Rng) -> (usize, usize) {
        let q = self.q();
        let mut u: f64 = r.gen();
        for (f, &v) in self.p.data().iter().enumerate() {
            if u < v {
                return (f / q, f % q);
            }
            u -= v;
        }
        // rounding left a sliver of mass; give it to the last positive entry
        let f = self.p.data().iter().rposition(|v| *v > 0.0).unwrap_or(0);
        (f / q, f % q)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticPair {
    qx: Matrix<f64>,
    qy: Matrix<f64>,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

fn validate_stochastic(m: &Matrix<f64>, name: &str) -> Result<()> {
    if m.rows() != m.cols() {
        return Err(Error::InvalidDistribution(format!("{name} must be square")));
    }
    for r in 0..m.rows() {
        let row = m.row(r);
        if row.iter().any(|v| !(v.is_finite() && *v >= 0.0 && *v <= 1.0)) {
            return Err(Error::InvalidDistribution(format!("{name} row {r} has an entry outside [0, 1]")));
        }
        let s: f64 = row.iter().sum();
        if libm::fabs(s - 1.0) > 1e-9 {
            return Err(Error::InvalidDistribution(format!("{name} row {r} sums to {s}")));
        }
    }
    Ok(())
}

fn column_sums(m: &Matrix<f64>) -> Vec<f64> {
    (0..m.cols()).map(|c| (0..m.rows()).map(|r| m.get(r, c)).sum()).collect()
}

impl StochasticPair {
    pub fn new(qx: Matrix<f64>, qy: Matrix<f64>) -> Result<Self> {
        validate_stochastic(&qx, "Qx")?;
        validate_stochastic(&qy, "Qy")?;
        if qx.rows() != qy.rows() {
            return Err(Error::shape(qx.rows(), qy.rows()));
        }
        let (dx, dy) = (column_sums(&qx), column_sums(&qy));
        Ok(StochasticPair { qx, qy, dx, dy })
    }

    pub fn uniform(q: usize) -> Self {
        let u = Matrix::from_fn(q, q, |_, _| 1.0 / q as f64);
        Self::new(u.clone(), u).expect("uniform rows are stochastic")
    }

    pub fn identity(q: usize) -> Self {
        Self::new(Matrix::identity(q), Matrix::identity(q)).expect("identity is stochastic")
    }

    /// `Qx = Qy = [[1-a, a], [a, 1-a]]`.
    pub fn symmetric_flip(a: f64) -> Result<Self> {
        let m = Matrix::from_vec(2, 2, vec![1.0 - a, a, a, 1.0 - a])?;
        Self::new(m.clone(), m)
    }

    pub fn q(&self) -> usize {
        self.qx.rows()
    }

    pub fn qx(&self) -> &Matrix<f64> {
        &self.qx
    }

    pub fn qy(&self) -> &Matrix<f64> {
        &self.qy
    }

    /// Column sums `dx(u) = sum_i Qx[i,u]`.
    pub fn partial_x(&self) -> &[f64] {
        &self.dx
    }

    pub fn partial_y(&self) -> &[f64] {
        &self.dy
    }

    /// The pair with the roles of x and y exchanged.
    pub fn swapped(&self) -> StochasticPair {
        StochasticPair { qx: self.qy.clone(), qy: self.qx.clone(), dx: self.dy.clone(), dy: self.dx.clone() }
    }

    /// True when every row puts all its mass on one symbol, so repeated
    /// draws for the same input always agree.
    pub fn is_deterministic(&self) -> bool {
        [&self.qx, &self.qy].iter().all(|m| m.data().iter().all(|v| *v == 0.0 || *v == 1.0))
    }

    pub fn kron(&self, other: &StochasticPair) -> StochasticPair {
        let k = |a: &Matrix<f64>, b: &Matrix<f64>| {
            let (qa, qb) = (a.rows(), b.rows());
            Matrix::from_fn(qa * qb, qa * qb, |r, c| a.get(r / qb, c / qb) * b.get(r % qb, c % qb))
        };
        let (qx, qy) = (k(&self.qx, &other.qx), k(&self.qy, &other.qy));
        let (dx, dy) = (column_sums(&qx), column_sums(&qy));
        StochasticPair { qx, qy, dx, dy }
    }
}

fn check_shapes(qp: &StochasticPair, t: &Tensor) -> Result<()> {
    let s = t.shape();
    if s.qi != s.qj || s.qi != qp.q() {
        return Err(Error::shape(format!("<q,q,qk> with q = {}", qp.q()), s));
    }
    Ok(())
}

/// `effQ_{i,j}`: efficacy with the noise of each incoming coefficient
/// weighted by the bucket mass `dx(i') dy(j')` of its source buckets.
pub fn effq_entry(qp: &StochasticPair, t: &Tensor, i: usize, j: usize) -> Result<f64> {
    check_shapes(qp, t)?;
    Ok(effq_unchecked(qp, t, i, j))
}

fn effq_unchecked(qp: &StochasticPair, t: &Tensor, i: usize, j: usize) -> f64 {
    let s = t.shape();
    let z = i * s.qj + j;
    let mut numer = 0.0;
    for k in 0..s.qk {
        numer += t.at(i * s.qk + k, j * s.qk + k, z);
    }
    let mut denom = 0.0;
    for x in 0..s.x_len() {
        let wx = qp.dx[x / s.qk];
        if wx == 0.0 {
            continue;
        }
        for y in 0..s.y_len() {
            let c = t.at(x, y, z);
            if c != 0.0 {
                denom += c * c * wx * qp.dy[y / s.qk];
            }
        }
    }
    if denom == 0.0 {
        0.0
    } else {
        numer / libm::sqrt(denom)
    }
}

pub fn effq_table(qp: &StochasticPair, t: &Tensor) -> Result<Matrix<f64>> {
    check_shapes(qp, t)?;
    let q = qp.q();
    Ok(Matrix::from_fn(q, q, |i, j| effq_unchecked(qp, t, i, j)))
}

/// `ln gamma`, or `None` if some inner sum with positive weight vanishes.
fn log_gamma(qp: &StochasticPair, t: &Tensor, p: &JointDistribution) -> Option<f64> {
    let q = qp.q();
    let e2 = Matrix::from_fn(q, q, |u, v| {
        let e = effq_unchecked(qp, t, u, v);
        e * e
    });
    let mut acc = 0.0;
    for i in 0..q {
        for j in 0..q {
            let w = p.get(i, j);
            if w == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for u in 0..q {
                let a = qp.qx.get(i, u);
                if a == 0.0 {
                    continue;
                }
                for v in 0..q {
                    inner += a * qp.qy.get(j, v) * e2.get(u, v);
                }
            }
            if !(inner > 0.0) {
                return None;
            }
            acc += w * libm::log(inner);
        }
    }
    Some(acc)
}

/// `gamma = prod_{i,j} (sum_{u,v} Qx[i,u] Qy[j,v] effQ_{u,v}^2)^{P[i,j]}`.
pub fn gamma(qp: &StochasticPair, t: &Tensor, p: &JointDistribution) -> Result<f64> {
    check_shapes(qp, t)?;
    if p.q() != qp.q() {
        return Err(Error::shape(qp.q(), p.q()));
    }
    log_gamma(qp, t, p)
        .map(libm::exp)
        .ok_or_else(|| Error::domain("an inner sum of gamma with positive weight is zero"))
}

/// `sqrt(gamma q^2)`, the efficacy a hashing scheme effectively achieves.
pub fn p_eff(gamma: f64, q: usize) -> f64 {
    libm::sqrt(gamma * (q * q) as f64)
}

/// Exponent `log rank / log(q sqrt(gamma))` of the hashing solver.
pub fn hashing_exponent(rank: usize, q: usize, gamma: f64) -> Result<f64> {
    let base = q as f64 * libm::sqrt(gamma);
    if !(base > 1.0) {
        return Err(Error::domain(format!("q sqrt(gamma) = {base} must exceed 1")));
    }
    Ok(libm::log(rank as f64) / libm::log(base))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("rho = {rho} outside [0, 1]")));
    }
    Ok(())
}

/// Closed form of gamma for the `eps -> 0` T2112 tensor with symmetric flip
/// matrices `[[1-a, a], [a, 1-a]]` under `P_rho`.
pub fn t2112_gamma_closed_form(a: f64, rho: f64) -> f64 {
    let same = (1.0 - a) * (1.0 - a) + a * a;
    let cross = 2.0 * a * (1.0 - a);
    libm::pow(2.0 * same + cross, (1.0 + rho) / 2.0) * libm::pow(2.0 * cross + same, (1.0 - rho) / 2.0)
}

/// Best flip probability for T2112 under `P_rho`.
pub fn t2112_optimal_a(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(((1.0 - libm::sqrt(3.0 * rho)) / 2.0).max(0.0))
}

/// Exponent of the hashing solver on T2112 as a function of rho.
pub fn omega_rho_t2112(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let ln5 = libm::log(5.0);
    if rho < 1.0 / 3.0 {
        let inner = 6.0
            * libm::pow(1.0 - rho, -rho / 2.0)
            * libm::pow(1.0 + rho, rho / 2.0)
            * libm::sqrt(1.0 - rho * rho);
        Ok(2.0 * ln5 / libm::log(inner))
    } else {
        Ok(4.0 * ln5 / ((5.0 + rho) * core::f64::consts::LN_2))
    }
}

/// Exponent of the purely hashing-based reference algorithm.
pub fn dubiner_exponent(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(2.0 / (rho + 1.0))
}

#[derive(Clone, Debug)]
pub struct GammaOptions {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub warm_start: Option<StochasticPair>,
    /// Smallest step before a start counts as converged.
    pub min_step: f64,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions { starts: 16, iterations: 500, seed: 0x6a09_e667, warm_start: None, min_step: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct GammaOptimum {
    pub pair: StochasticPair,
    pub gamma: f64,
    /// Whether the best start reached the minimum step size.
    pub converged: bool,
}

/// Multi-start projected coordinate ascent on the rows of `Qx` and `Qy`.
///
/// Each move shifts mass between two entries of one row, which keeps every
/// row on the simplex. A sweep tries all such moves at the current step and
/// keeps improvements; a sweep without improvement halves the step. Starts
/// are the uniform pair, the identity pair, the optional warm start and
/// random pairs.
pub fn optimize_gamma(t: &Tensor, p: &JointDistribution, opts: &GammaOptions) -> Result<GammaOptimum> {
    let q = p.q();
    let uniform = StochasticPair::uniform(q);
    check_shapes(&uniform, t)?;
    let mut starts: Vec<(Matrix<f64>, Matrix<f64>)> = vec![
        (uniform.qx.clone(), uniform.qy.clone()),
        (Matrix::identity(q), Matrix::identity(q)),
    ];
    if let Some(w) = &opts.warm_start {
        if w.q() != q {
            return Err(Error::shape(q, w.q()));
        }
        starts.push((w.qx.clone(), w.qy.clone()));
    }
    let mut r = rng::seeded(opts.seed);
    while starts.len() < opts.starts.max(starts.len()) {
        starts.push((random_stochastic(q, &mut r), random_stochastic(q, &mut r)));
    }

    let mut best: Option<(f64, StochasticPair, bool)> = None;
    for (qx, qy) in starts {
        let (lg, pair, converged) = ascend(t, p, qx, qy, opts);
        if best.as_ref().map_or(true, |(b, _, _)| lg > *b) {
            best = Some((lg, pair, converged));
        }
    }
    let (lg, pair, converged) = best.expect("at least two starts");
    if lg == f64::NEG_INFINITY {
        return Err(Error::domain("gamma is zero for every start"));
    }
    Ok(GammaOptimum { pair, gamma: libm::exp(lg), converged })
}

fn random_stochastic(q: usize, r: &mut rng::Rng) -> Matrix<f64> {
    let mut m = Matrix::from_fn(q, q, |_, _| -libm::log(1.0 - r.gen::<f64>()));
    for row in 0..q {
        let s: f64 = m.row(row).iter().sum();
        for v in m.row_mut(row) {
            *v /= s;
        }
    }
    m
}

fn score(t: &Tensor, p: &JointDistribution, qx: &Matrix<f64>, qy: &Matrix<f64>) -> f64 {
    let pair = StochasticPair { dx: column_sums(qx), dy: column_sums(qy), qx: qx.clone(), qy: qy.clone() };
    log_gamma(&pair, t, p).unwrap_or(f64::NEG_INFINITY)
}

fn ascend(
    t: &Tensor,
    p: &JointDistribution,
    mut qx: Matrix<f64>,
    mut qy: Matrix<f64>,
    opts: &GammaOptions,
) -> (f64, StochasticPair, bool) {
    let q = qx.rows();
    let mut cur = score(t, p, &qx, &qy);
    let mut step: f64 = 0.25;
    let mut converged = false;
    for _ in 0..opts.iterations {
        let mut improved = false;
        for side in 0..2 {
            for row in 0..q {
                for from in 0..q {
                    for to in 0..q {
                        if from == to {
                            continue;
                        }
                        let m = if side == 0 { &mut qx } else { &mut qy };
                        let delta = step.min(m.get(row, from));
                        if delta <= 0.0 {
                            continue;
                        }
                        let (old_f, old_t) = (m.get(row, from), m.get(row, to));
                        m.set(row, from, old_f - delta);
                        m.set(row, to, old_t + delta);
                        let s = score(t, p, &qx, &qy);
                        if s > cur + 1e-15 {
                            cur = s;
                            improved = true;
                        } else {
                            let m = if side == 0 { &mut qx } else { &mut qy };
                            m.set(row, from, old_f);
                            m.set(row, to, old_t);
                        }
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
            if step < opts.min_step {
                converged = true;
                break;
            }
        }
    }
    let pair = StochasticPair { dx: column_sums(&qx), dy: column_sums(&qy), qx, qy };
    (cur, pair, converged)
}
