//! Monte-Carlo and exhaustive checks of the probabilistic lemmas the
//! solvers lean on.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::rng;

use super::plan::{skew_metrics, IndicatorSet};

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    /// Random signs: lowest rate of `|a^T P b| >= |P[0,0]|` over the matrices.
    pub sign_min_rate: f64,
    pub sign_threshold: f64,
    pub sign_matrices: usize,
    /// Random rectangles: lowest hit rate over the admissible sets.
    pub rect_min_rate: f64,
    pub rect_threshold: f64,
    pub rect_sets: usize,
    /// Regular sets of `[4]^2` checked for `V_x V_y <= |S|^3`.
    pub regular_checked: usize,
    pub regular_violations: usize,
}

impl LemmaReport {
    pub fn sign_pass(&self) -> bool {
        self.sign_min_rate >= self.sign_threshold
    }

    pub fn rect_pass(&self) -> bool {
        self.rect_min_rate >= self.rect_threshold
    }

    pub fn regular_pass(&self) -> bool {
        self.regular_violations == 0 && self.regular_checked > 0
    }

    pub fn pass(&self) -> bool {
        self.sign_pass() && self.rect_pass() && self.regular_pass()
    }
}

pub const SIGN_DRAWS: usize = 100_000;
pub const RECT_DRAWS: usize = 20_000;

/// `0.25 - 3 sigma` for a Bernoulli(1/4) rate over `draws` samples.
pub fn quarter_threshold(draws: usize) -> f64 {
    0.25 - 3.0 * libm::sqrt(0.25 * 0.75 / draws as f64)
}

/// Rate of `|sum a_i b_j P_ij| >= |P_00|` over uniform sign vectors.
pub fn sign_rate(p: &[f64], size: usize, draws: usize, r: &mut rng::Rng) -> f64 {
    let target = libm::fabs(p[0]);
    let mut hits = 0;
    for _ in 0..draws {
        let bits: u64 = r.gen();
        let mut total = 0.0;
        for i in 0..size {
            let mut row = 0.0;
            for j in 0..size {
                let b = if (bits >> (size + j)) & 1 == 1 { -1.0 } else { 1.0 };
                row += b * p[i * size + j];
            }
            total += if (bits >> i) & 1 == 1 { -row } else { row };
        }
        if libm::fabs(total) >= target {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Union of `k` disjoint `rs x cs` blocks on shuffled rows and columns of
/// `[q]^2`; every such set is regular.
pub fn random_regular_set(q: usize, r: &mut rng::Rng) -> IndicatorSet {
    loop {
        let rs = r.gen_range(1..=q / 2);
        let cs = r.gen_range(1..=q / 2);
        let kmax = (q / rs).min(q / cs);
        let k = r.gen_range(1..=kmax);
        let mut rows: Vec<usize> = (0..q).collect();
        let mut cols: Vec<usize> = (0..q).collect();
        rows.shuffle(r);
        cols.shuffle(r);
        let mut pairs = Vec::new();
        for b in 0..k {
            for &i in &rows[b * rs..(b + 1) * rs] {
                for &j in &cols[b * cs..(b + 1) * cs] {
                    pairs.push((i, j));
                }
            }
        }
        let s = IndicatorSet::new(q, &pairs);
        let m = skew_metrics(&s);
        let bound = libm::pow(s.size() as f64, 1.5);
        if m.v_x as f64 <= bound && m.v_y as f64 <= bound {
            return s;
        }
    }
}

/// Rate at which random `S_x x S_y` with `|S_x| = |S_y| = ceil(q / sqrt|S|)`
/// meets `S`.
pub fn rectangle_rate(s: &IndicatorSet, draws: usize, r: &mut rng::Rng) -> f64 {
    let q = s.q;
    let side = libm::ceil(q as f64 / libm::sqrt(s.size() as f64) - 1e-12) as usize;
    let mut idx: Vec<usize> = (0..q).collect();
    let mut hits = 0;
    for _ in 0..draws {
        idx.shuffle(r);
        let sx: Vec<usize> = idx[..side].to_vec();
        idx.shuffle(r);
        let sy = &idx[..side];
        if sx.iter().any(|&i| sy.iter().any(|&j| s.contains(i, j))) {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Every regular subset of `[q]^2` (for small `q`), checked against
/// `V_x V_y <= |S|^3`. Returns `(checked, violations)`.
pub fn regular_product_bound(q: usize) -> (usize, usize) {
    let cells = q * q;
    let (mut checked, mut bad) = (0, 0);
    for mask in 1u64..(1u64 << cells) {
        let pairs: Vec<(usize, usize)> = (0..cells).filter(|c| mask >> c & 1 == 1).map(|c| (c / q, c % q)).collect();
        let s = IndicatorSet::new(q, &pairs);
        let m = skew_metrics(&s);
        if !m.regular {
            continue;
        }
        checked += 1;
        let size = s.size() as u64;
        if (m.v_x as u64) * (m.v_y as u64) > size * size * size {
            bad += 1;
        }
    }
    (checked, bad)
}

pub fn lemma_checks(seed: u64) -> LemmaReport {
    let mut r = rng::stream(seed, 5);
    let size = 6;
    let mut sign_min_rate = f64::INFINITY;
    for _ in 0..20 {
        let p: Vec<f64> = (0..size * size).map(|_| r.gen_range(-1.0..1.0)).collect();
        sign_min_rate = sign_min_rate.min(sign_rate(&p, size, SIGN_DRAWS, &mut r));
    }
    let mut rect_min_rate = f64::INFINITY;
    for _ in 0..20 {
        let s = random_regular_set(8, &mut r);
        rect_min_rate = rect_min_rate.min(rectangle_rate(&s, RECT_DRAWS, &mut r));
    }
    let (regular_checked, regular_violations) = regular_product_bound(4);
    LemmaReport {
        sign_min_rate,
        sign_threshold: quarter_threshold(SIGN_DRAWS),
        sign_matrices: 20,
        rect_min_rate,
        rect_threshold: quarter_threshold(RECT_DRAWS),
        rect_sets: 20,
        regular_checked,
        regular_violations,
    }
}
