//! Parameter planning for both solvers.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::efficacy::{eff_table, distinct_values};
use crate::error::{Error, Result};
use crate::hashing::{gamma, JointDistribution, StochasticPair};
use crate::tensor::{Decomposition, Tensor};

/// A subset of `[q]^2`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndicatorSet {
    pub q: usize,
    pub cells: Vec<bool>,
}

impl IndicatorSet {
    pub fn new(q: usize, pairs: &[(usize, usize)]) -> Self {
        let mut cells = vec![false; q * q];
        for &(i, j) in pairs {
            cells[i * q + j] = true;
        }
        IndicatorSet { q, cells }
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.q + j]
    }

    pub fn size(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn transpose(&self) -> Self {
        let q = self.q;
        IndicatorSet { q, cells: (0..q * q).map(|f| self.contains(f % q, f / q)).collect() }
    }

    /// `self (x) other` on `[q q']^2`, pairing `(i, i')` as `i q' + i'`.
    pub fn kron(&self, other: &IndicatorSet) -> Self {
        let (a, b) = (self.q, other.q);
        let q = a * b;
        let cells = (0..q * q)
            .map(|f| {
                let (r, c) = (f / q, f % q);
                self.contains(r / b, c / b) && other.contains(r % b, c % b)
            })
            .collect();
        IndicatorSet { q, cells }
    }

    fn row_counts(&self) -> Vec<usize> {
        (0..self.q).map(|i| (0..self.q).filter(|&j| self.contains(i, j)).count()).collect()
    }

    fn col_counts(&self) -> Vec<usize> {
        (0..self.q).map(|j| (0..self.q).filter(|&i| self.contains(i, j)).count()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SkewMetrics {
    /// Sum of squared row occupancies.
    pub v_x: usize,
    /// Sum of squared column occupancies.
    pub v_y: usize,
    /// Nonempty rows share one size and nonempty columns share one size.
    pub regular: bool,
}

pub fn skew_metrics(s: &IndicatorSet) -> SkewMetrics {
    let rows = s.row_counts();
    let cols = s.col_counts();
    let sq = |v: &[usize]| v.iter().map(|c| c * c).sum();
    let one_size = |v: &[usize]| {
        let mut nz = v.iter().filter(|c| **c > 0);
        match nz.next() {
            Some(first) => nz.all(|c| c == first),
            None => true,
        }
    };
    SkewMetrics { v_x: sq(&rows), v_y: sq(&cols), regular: one_size(&rows) && one_size(&cols) }
}

/// Repetition and threshold constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub reps: usize,
    pub majority: usize,
    /// Standardized score a bucket pair needs to be flagged.
    pub detect_sigma: f64,
    /// Leaf cutoff handed to the recursive apply.
    pub cutoff: usize,
    /// Stop once a pair verifies, or once no pair can reach the majority.
    pub early_stop: bool,
}

impl SolverConfig {
    /// `(25, 7)` up to `n = 2^14`, `(ceil(100 ln n), ceil(20 ln n))` above.
    pub fn for_n(n: usize) -> Self {
        let (reps, majority) = if n <= 1 << 14 {
            (25, 7)
        } else {
            let ln = libm::log(n as f64);
            (libm::ceil(100.0 * ln) as usize, libm::ceil(20.0 * ln) as usize)
        };
        SolverConfig { reps, majority, detect_sigma: 10.0, cutoff: 5, early_stop: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanKind {
    /// Uniform random buckets.
    Uniform,
    /// Buckets drawn coordinate-wise through a stochastic pair.
    Lsh,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverPlan {
    pub kind: PlanKind,
    pub n: usize,
    /// Correlation of the vectors the tensor sees.
    pub rho: f64,
    /// Base alphabet of one level (the symmetrized tensor counts as one
    /// level of alphabet `q^2`).
    pub q: usize,
    /// Kronecker power. The hashing plan runs `N` levels of `T` and `N` of
    /// its reflection.
    pub big_n: usize,
    /// Per-level efficacy threshold.
    pub f: f64,
    pub threshold: IndicatorSet,
    pub skew: SkewMetrics,
    pub symmetrized: bool,
    pub bucket_count: usize,
    pub g: usize,
    /// Copies per input (`t`, or `c` for hashing).
    pub copies: usize,
    /// Hashing only.
    pub gamma: Option<f64>,
    pub reps: usize,
    pub majority: usize,
    pub detect_sigma: f64,
}

impl SolverPlan {
    /// Number of tensor levels actually applied.
    pub fn level_count(&self) -> usize {
        match self.kind {
            PlanKind::Uniform => self.big_n,
            PlanKind::Lsh => 2 * self.big_n,
        }
    }
}

fn ceil_log(x: f64, base: f64) -> usize {
    let v = libm::log(x) / libm::log(base);
    (libm::ceil(v - 1e-9) as usize).max(1)
}

/// Threshold set maximizing `f^2 |S_f|` over the distinct entry
/// efficacies; ties go to the larger `f`.
pub fn best_threshold(d: &Decomposition) -> Result<(f64, IndicatorSet)> {
    best_threshold_of(&d.to_tensor()?)
}

/// [`best_threshold`] for a tensor given directly, such as a limit tensor
/// with no decomposition of its own.
pub fn best_threshold_of(t: &Tensor) -> Result<(f64, IndicatorSet)> {
    let s = t.shape();
    if s.qi != s.qj {
        return Err(Error::shape("q_i = q_j", s));
    }
    let q = s.qi;
    let sq = eff_table(t).squared();
    let mut best: Option<(f64, f64, IndicatorSet)> = None;
    for v in distinct_values(&sq, 1e-9) {
        if v <= 0.0 {
            continue;
        }
        let pairs: Vec<(usize, usize)> =
            (0..q * q).map(|f| (f / q, f % q)).filter(|&(i, j)| sq.get(i, j) >= v * (1.0 - 1e-9)).collect();
        let score = v * pairs.len() as f64;
        // values arrive largest first, so a tie keeps the earlier, larger f
        if best.as_ref().is_none_or(|b| score > b.0 * (1.0 + 1e-9)) {
            best = Some((score, v, IndicatorSet::new(q, &pairs)));
        }
    }
    let (_, v, set) = best.ok_or_else(|| Error::domain("tensor has no entry with positive efficacy"))?;
    Ok((libm::sqrt(v), set))
}

/// Parameters of the uniform-bucket solver for `n` inputs whose vectors
/// have correlation `rho`.
pub fn plan_uniform(n: usize, rho: f64, d: &Decomposition, cfg: &SolverConfig) -> Result<SolverPlan> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("rho = {rho} must lie in (0, 1]")));
    }
    let total = eff_table(&d.to_tensor()?).total;
    if !(total > 1.0) {
        return Err(Error::domain(format!("eff = {total} must exceed 1")));
    }
    let (mut f, mut set) = best_threshold(d)?;
    let mut q = d.shape().qi;
    let mut skew = skew_metrics(&set);
    let size = set.size() as f64;
    let symmetrized = skew.v_x as f64 > libm::pow(size, 1.5) || skew.v_y as f64 > libm::pow(size, 1.5);
    if symmetrized {
        set = set.kron(&set.transpose());
        skew = skew_metrics(&set);
        f *= f;
        q *= q;
    }
    if !(f > 1.0) {
        return Err(Error::domain(format!("threshold efficacy {f} must exceed 1")));
    }
    let qf = q as f64;
    let size = set.size() as f64;
    let e2 = libm::log(qf * qf / size) / libm::log(qf * f);
    let t0 = libm::pow(n as f64, e2 / (2.0 - e2));
    let m = libm::pow(20.0 * n as f64 * t0 / rho, 1.0 / (1.0 + libm::log(f) / libm::log(qf)));
    let big_n = ceil_log(m, qf);
    let bucket_count = q.pow(big_n as u32);
    let g = (libm::floor(rho * libm::pow(f, big_n as f64) / 20.0) as usize).max(1);
    let copies = (libm::round((bucket_count * g) as f64 / n as f64) as usize).max(1);
    Ok(SolverPlan {
        kind: PlanKind::Uniform,
        n,
        rho,
        q,
        big_n,
        f,
        threshold: set,
        skew,
        symmetrized,
        bucket_count,
        g,
        copies,
        gamma: None,
        reps: cfg.reps,
        majority: cfg.majority,
        detect_sigma: cfg.detect_sigma,
    })
}

/// Parameters of the hashing solver. `rho` is the correlation of the
/// vectors the tensor sees (after any `+-1` mapping and expansion); `p`
/// is the law of the raw symbols the buckets are drawn from.
pub fn plan_lsh(
    n: usize,
    p: &JointDistribution,
    rho: f64,
    d: &Decomposition,
    qp: &StochasticPair,
    cfg: &SolverConfig,
) -> Result<SolverPlan> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("rho = {rho} must lie in (0, 1]")));
    }
    let t = d.to_tensor()?;
    let q = d.shape().qi;
    let gm = gamma(qp, &t, p)?;
    if !(gm > 1.0 / q as f64) {
        return Err(Error::domain(format!("gamma = {gm} must exceed 1/q")));
    }
    let big_n = ceil_log(20.0 * n as f64, (q * q) as f64 * gm);
    let bucket_count = q.pow(2 * big_n as u32);
    let (f, set) = best_threshold(d)?;
    let skew = skew_metrics(&set);
    let schedule = g_schedule(rho, &t, big_n);
    let g = schedule[0];
    Ok(SolverPlan {
        kind: PlanKind::Lsh,
        n,
        rho,
        q,
        big_n,
        f,
        threshold: set,
        skew,
        symmetrized: true,
        bucket_count,
        g,
        copies: lsh_copies(bucket_count, g, n),
        gamma: Some(gm),
        reps: cfg.reps,
        majority: cfg.majority,
        detect_sigma: cfg.detect_sigma,
    })
}

/// `c = q^{2N} g / n`, at least 1.
pub fn lsh_copies(bucket_count: usize, g: usize, n: usize) -> usize {
    (libm::round((bucket_count * g) as f64 / n as f64) as usize).max(1)
}

/// Bucket sizes the hashing solver tries: powers of two up to the largest
/// size at which the best bucket pair still clears the `20 / rho` margin.
pub fn g_schedule(rho: f64, t: &Tensor, big_n: usize) -> Vec<usize> {
    let sq = eff_table(t).squared();
    let max_eff = libm::sqrt(sq.data().iter().cloned().fold(0.0, f64::max));
    let cap = rho * libm::pow(max_eff, 2.0 * big_n as f64) / 20.0;
    let mut out = vec![1];
    while ((out[out.len() - 1] * 2) as f64) <= cap {
        out.push(out[out.len() - 1] * 2);
    }
    out
}
