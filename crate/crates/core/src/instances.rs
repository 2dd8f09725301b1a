//! Planted-pair instances, the subset-product expansion, and the mapping
//! from a `q`-ary alphabet to `+-1`.
//!
//! Binary symbols are stored one bit each, bit 0 meaning `+1` and bit 1
//! meaning `-1`, so inner products are XOR plus popcount. Larger alphabets
//! use one byte per symbol.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::hashing::JointDistribution;
use crate::matrix::Matrix;
use crate::rng;

/// A `+-1` vector packed into 64-bit words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PmVector {
    words: Vec<u64>,
    len: usize,
}

impl PmVector {
    /// All `+1`.
    pub fn ones(len: usize) -> Self {
        PmVector { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_signs(signs: &[i8]) -> Self {
        let mut v = Self::ones(signs.len());
        for (i, &s) in signs.iter().enumerate() {
            if s < 0 {
                v.words[i / 64] |= 1 << (i % 64);
            }
        }
        v
    }

    /// Packs symbols from `{0, 1}`; any nonzero symbol counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::ones(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.words[i / 64] |= 1 << (i % 64);
            }
        }
        v
    }

    /// Rebuilds a vector from its packed words. Bits past `len` are cleared.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            return Err(Error::shape(format!("{} words", len.div_ceil(64)), words.len()));
        }
        let mut v = PmVector { words, len };
        v.clear_tail();
        Ok(v)
    }

    pub fn random(len: usize, r: &mut rng::Rng) -> Self {
        let mut v = Self::ones(len);
        for w in &mut v.words {
            *w = r.gen();
        }
        v.clear_tail();
        v
    }

    fn clear_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Symbol at `i`: 0 for `+1`, 1 for `-1`.
    #[inline]
    pub fn bit(&self, i: usize) -> u8 {
        ((self.words[i / 64] >> (i % 64)) & 1) as u8
    }

    #[inline]
    pub fn get(&self, i: usize) -> i8 {
        1 - 2 * self.bit(i) as i8
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Inner product by word-level XOR and popcount.
    pub fn dot(&self, other: &PmVector) -> i64 {
        assert_eq!(self.len, other.len, "dot of vectors with different lengths");
        let diff: u32 = self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones()).sum();
        self.len as i64 - 2 * diff as i64
    }

    /// Inner product one coordinate at a time; the oracle for [`Self::dot`].
    pub fn dot_naive(&self, other: &PmVector) -> i64 {
        assert_eq!(self.len, other.len, "dot of vectors with different lengths");
        (0..self.len).map(|i| self.get(i) as i64 * other.get(i) as i64).sum()
    }

    /// Inner product over coordinates `start..start + len`.
    pub fn dot_range(&self, other: &PmVector, start: usize, len: usize) -> i64 {
        assert!(start + len <= self.len.min(other.len), "range past the end of a vector");
        let mut diff = 0u32;
        let mut i = start;
        let end = start + len;
        while i < end {
            let (w, off) = (i / 64, i % 64);
            let take = (64 - off).min(end - i);
            let mask = if take == 64 { u64::MAX } else { ((1u64 << take) - 1) << off };
            diff += ((self.words[w] ^ other.words[w]) & mask).count_ones();
            i += take;
        }
        len as i64 - 2 * diff as i64
    }

    /// Coordinates `start..start + len` as a new vector.
    pub fn slice(&self, start: usize, len: usize) -> PmVector {
        let mut v = Self::ones(len);
        for i in 0..len {
            if self.bit(start + i) == 1 {
                v.words[i / 64] |= 1 << (i % 64);
            }
        }
        v
    }
}

/// The rows of one side of an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rows {
    /// `q = 2`, packed bits.
    Bits(Vec<PmVector>),
    /// `q > 2`, one byte per symbol.
    Symbols(Vec<Vec<u8>>),
}

impl Rows {
    pub fn len(&self) -> usize {
        match self {
            Rows::Bits(v) => v.len(),
            Rows::Symbols(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Symbol of row `i` at coordinate `l`.
    pub fn symbol(&self, i: usize, l: usize) -> usize {
        match self {
            Rows::Bits(v) => v[i].bit(l) as usize,
            Rows::Symbols(v) => v[i][l] as usize,
        }
    }
}

/// How the planted pair was drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum PlantedLaw {
    /// Classic: coordinates agree with probability `(1 + rho) / 2`.
    Rho(f64),
    Joint(JointDistribution),
}

impl PlantedLaw {
    pub fn distribution(&self) -> Result<JointDistribution> {
        match self {
            PlantedLaw::Rho(r) => JointDistribution::rho(*r),
            PlantedLaw::Joint(p) => Ok(p.clone()),
        }
    }
}

/// An instance as the solver sees it. The planted indices are not part of
/// it; they live in [`PlantedSidecar`].
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub d: usize,
    pub q: usize,
    pub x: Rows,
    pub y: Rows,
    pub law: PlantedLaw,
    pub seed: u64,
}

impl Instance {
    /// Same rows under a different law. Solvers read the law as the
    /// correlation they are looking for, so this is how a null instance
    /// gets searched for a `rho`-correlated pair.
    pub fn with_law(mut self, law: PlantedLaw) -> Self {
        self.law = law;
        self
    }
}

/// Where the planted pair sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedSidecar {
    pub i: usize,
    pub j: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Planted {
    pub instance: Instance,
    pub sidecar: PlantedSidecar,
}

fn check_size(n: usize, d: usize) -> Result<()> {
    if n < 2 || d == 0 {
        return Err(Error::domain(format!("need n >= 2 and d >= 1, got n={n}, d={d}")));
    }
    Ok(())
}

fn uniform_rows(n: usize, d: usize, q: usize, r: &mut rng::Rng) -> Rows {
    if q == 2 {
        Rows::Bits((0..n).map(|_| PmVector::random(d, r)).collect())
    } else {
        Rows::Symbols((0..n).map(|_| (0..d).map(|_| r.gen_range(0..q) as u8).collect()).collect())
    }
}

fn pick_planted(n: usize, r: &mut rng::Rng) -> PlantedSidecar {
    PlantedSidecar { i: r.gen_range(0..n), j: r.gen_range(0..n) }
}

/// Classic instance: `2n` uniform `+-1` vectors of length `d`, with
/// `y[j*]` a `rho`-correlated copy of `x[i*]`.
pub fn gen_planted(n: usize, d: usize, rho: f64, seed: u64) -> Result<Planted> {
    check_size(n, d)?;
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidDistribution(format!("correlation {rho} outside [-1, 1]")));
    }
    let mut r = rng::stream(seed, 0);
    let x = uniform_rows(n, d, 2, &mut r);
    let mut y = uniform_rows(n, d, 2, &mut r);
    let sidecar = pick_planted(n, &mut r);
    if let (Rows::Bits(xs), Rows::Bits(ys)) = (&x, &mut y) {
        let mut copy = xs[sidecar.i].clone();
        let flip = (1.0 - rho) / 2.0;
        for l in 0..d {
            if r.gen::<f64>() < flip {
                copy.flip(l);
            }
        }
        ys[sidecar.j] = copy;
    }
    let instance = Instance { n, d, q: 2, x, y, law: PlantedLaw::Rho(rho), seed };
    Ok(Planted { instance, sidecar })
}

/// Instance with no planted pair.
pub fn gen_null(n: usize, d: usize, q: usize, seed: u64) -> Result<Instance> {
    check_size(n, d)?;
    if !(2..=256).contains(&q) {
        return Err(Error::domain(format!("alphabet size {q} outside 2..=256")));
    }
    let mut r = rng::stream(seed, 0);
    let x = uniform_rows(n, d, q, &mut r);
    let y = uniform_rows(n, d, q, &mut r);
    let law = if q == 2 { PlantedLaw::Rho(0.0) } else { PlantedLaw::Joint(JointDistribution::uniform(q)?) };
    Ok(Instance { n, d, q, x, y, law, seed })
}

/// Instance over `[q]` whose planted coordinates are drawn from `P`.
pub fn gen_planted_p(n: usize, d: usize, p: &JointDistribution, seed: u64) -> Result<Planted> {
    check_size(n, d)?;
    let q = p.q();
    if q > 256 {
        return Err(Error::domain(format!("alphabet size {q} above 256")));
    }
    let mut r = rng::stream(seed, 0);
    let mut x = uniform_rows(n, d, q, &mut r);
    let mut y = uniform_rows(n, d, q, &mut r);
    let sidecar = pick_planted(n, &mut r);
    let pairs: Vec<(usize, usize)> = (0..d).map(|_| p.sample(&mut r)).collect();
    match (&mut x, &mut y) {
        (Rows::Bits(xs), Rows::Bits(ys)) => {
            let xb: Vec<u8> = pairs.iter().map(|p| p.0 as u8).collect();
            let yb: Vec<u8> = pairs.iter().map(|p| p.1 as u8).collect();
            xs[sidecar.i] = PmVector::from_bits(&xb);
            ys[sidecar.j] = PmVector::from_bits(&yb);
        }
        (Rows::Symbols(xs), Rows::Symbols(ys)) => {
            xs[sidecar.i] = pairs.iter().map(|p| p.0 as u8).collect();
            ys[sidecar.j] = pairs.iter().map(|p| p.1 as u8).collect();
        }
        _ => unreachable!("both sides share an alphabet"),
    }
    let instance = Instance { n, d, q, x, y, law: PlantedLaw::Joint(p.clone()), seed };
    Ok(Planted { instance, sidecar })
}

/// All `r`-subsets of `0..d` in lexicographic order.
pub fn subsets_lex(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if r > d {
        return out;
    }
    let mut cur: Vec<usize> = (0..r).collect();
    loop {
        out.push(cur.clone());
        // advance the rightmost position that still has room
        let Some(pos) = (0..r).rev().find(|&p| cur[p] < d - r + p) else {
            return out;
        };
        cur[pos] += 1;
        for p in pos + 1..r {
            cur[p] = cur[p - 1] + 1;
        }
    }
}

/// `x'_S = prod_{l in S} x[l]` for every `r`-subset `S`, lexicographic.
pub fn expand_all_subsets(x: &[i8], r: usize) -> Vec<i8> {
    subsets_lex(x.len(), r).iter().map(|s| s.iter().map(|&l| x[l]).product()).collect()
}

/// Subsets `S1 u S2` with `S1` of size `r/2` from the first half of a
/// coordinate range and `S2` of size `r/2` from the second half. Entry
/// `e` is `(S1 number e / m2, S2 number e % m2)`, each half in
/// lexicographic order. `r = 1` is the identity embedding of the range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitFamily {
    start: usize,
    half: usize,
    r: usize,
    first: Vec<Vec<usize>>,
    second: Vec<Vec<usize>>,
}

impl SplitFamily {
    /// Family over coordinates `start..start + len`.
    pub fn new(start: usize, len: usize, r: usize) -> Result<Self> {
        if r == 1 {
            return Ok(SplitFamily { start, half: len, r, first: vec![], second: vec![] });
        }
        if r == 0 || r % 2 != 0 {
            return Err(Error::domain(format!("subset size {r} must be 1 or even")));
        }
        let half = len / 2;
        if half < r / 2 {
            return Err(Error::domain(format!("range of {len} coordinates too short for subset size {r}")));
        }
        let first: Vec<Vec<usize>> = subsets_lex(half, r / 2).into_iter().map(|s| s.iter().map(|l| l + start).collect()).collect();
        let second = subsets_lex(half, r / 2).into_iter().map(|s| s.iter().map(|l| l + start + half).collect()).collect();
        Ok(SplitFamily { start, half, r, first, second })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        if self.r == 1 {
            self.half
        } else {
            self.first.len() * self.second.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sizes of the two half families (`m1`, `m2`).
    pub fn halves(&self) -> (usize, usize) {
        if self.r == 1 {
            (self.half, 1)
        } else {
            (self.first.len(), self.second.len())
        }
    }

    pub fn first_half(&self) -> &[Vec<usize>] {
        &self.first
    }

    pub fn second_half(&self) -> &[Vec<usize>] {
        &self.second
    }

    /// Coordinates of entry `e`.
    pub fn subset(&self, e: usize) -> Vec<usize> {
        if self.r == 1 {
            return vec![self.start + e];
        }
        let m2 = self.second.len();
        let mut s = self.first[e / m2].clone();
        s.extend_from_slice(&self.second[e % m2]);
        s
    }

    /// `x'_S` for entry `e`.
    pub fn value(&self, x: &PmVector, e: usize) -> i8 {
        if self.r == 1 {
            return x.get(self.start + e);
        }
        let m2 = self.second.len();
        let parity: u8 = self.first[e / m2].iter().chain(&self.second[e % m2]).map(|&l| x.bit(l)).fold(0, |a, b| a ^ b);
        1 - 2 * parity as i8
    }

    /// Entries `start..start + len` of the expansion of `x`.
    pub fn window(&self, x: &PmVector, start: usize, len: usize) -> Vec<i8> {
        (start..start + len).map(|e| self.value(x, e)).collect()
    }
}

/// First `m` entries of the split-family expansion of each row, over the
/// whole vector (`r = 1` keeps the first `m` coordinates).
pub fn expand_vectors(xs: &[PmVector], r: usize, m: usize) -> Result<Vec<Vec<i8>>> {
    let d = xs.first().map_or(0, |x| x.len());
    let fam = SplitFamily::new(0, d, r)?;
    if fam.len() < m {
        return Err(Error::domain(format!("subset family has {} entries, {m} requested", fam.len())));
    }
    Ok(xs.iter().map(|x| fam.window(x, 0, m)).collect())
}

/// Maps taking symbols to `+-1`: `g` for the x side, `h` for the y side.
#[derive(Clone, Debug, PartialEq)]
pub struct PmMapping {
    pub g: Vec<i8>,
    pub h: Vec<i8>,
    /// `E[g(b0) h(b1)]` under the planted law.
    pub rho_out: f64,
    /// True when `P` had odd `q` and was lifted to `2q` first; symbol `a`
    /// then becomes `2a + b` for a fresh uniform bit `b`.
    pub lifted: bool,
}

/// `P` on `[2q]` obtained by appending an independent uniform bit to each
/// side: `P'[2a+b, 2c+e] = P[a, c] / 4`.
pub fn lift_odd(p: &JointDistribution) -> Result<JointDistribution> {
    let q = p.q();
    JointDistribution::new(Matrix::from_fn(2 * q, 2 * q, |i, j| p.get(i / 2, j / 2) / 4.0))
}

/// Indices of the `k` largest entries (ties to the lower index).
fn top_half(v: &[f64]) -> Vec<i8> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut out = vec![-1i8; v.len()];
    for &i in &idx[..v.len() / 2] {
        out[i] = 1;
    }
    out
}

/// Greedy balanced `+-1` mapping with positive correlation under `P`.
///
/// A column of `P` that is not constant fixes `g` on the x symbols (its
/// top half goes to `+1`); `h` is then the top half of `v = P^T g`. For a
/// symmetric `P` this is the same as starting from a row.
pub fn map_to_pm1(p: &JointDistribution) -> Result<PmMapping> {
    if p.is_uniform() {
        return Err(Error::NoValidMapping);
    }
    let (p, lifted) = if p.q() % 2 == 1 { (lift_odd(p)?, true) } else { (p.clone(), false) };
    let q = p.q();
    let col = (0..q)
        .find(|&j| (0..q).any(|i| libm::fabs(p.get(i, j) - p.get(0, j)) > 1e-12))
        .ok_or(Error::NoValidMapping)?;
    let column: Vec<f64> = (0..q).map(|i| p.get(i, col)).collect();
    let g = top_half(&column);
    let v: Vec<f64> = (0..q).map(|j| (0..q).map(|i| p.get(i, j) * g[i] as f64).sum()).collect();
    let h = top_half(&v);
    let rho_out: f64 = v.iter().zip(&h).map(|(a, b)| a * *b as f64).sum();
    if !(rho_out > 1e-12) {
        return Err(Error::NoValidMapping);
    }
    Ok(PmMapping { g, h, rho_out, lifted })
}

impl PmMapping {
    /// Applies the mapping to every row of both sides. `seed` feeds the
    /// extra bits of an odd-`q` lift.
    pub fn apply(&self, inst: &Instance, seed: u64) -> (Vec<PmVector>, Vec<PmVector>) {
        let mut r = rng::stream(seed, 7);
        let mut side = |rows: &Rows, map: &[i8]| -> Vec<PmVector> {
            (0..rows.len())
                .map(|i| {
                    let signs: Vec<i8> = (0..inst.d)
                        .map(|l| {
                            let a = rows.symbol(i, l);
                            let s = if self.lifted { 2 * a + r.gen_range(0..2) } else { a };
                            map[s]
                        })
                        .collect();
                    PmVector::from_signs(&signs)
                })
                .collect()
        };
        let xs = side(&inst.x, &self.g);
        let ys = side(&inst.y, &self.h);
        (xs, ys)
    }
}

/// The instance as `+-1` rows plus the correlation the planted pair keeps.
/// Binary instances with the classic law pass through unchanged.
pub fn to_pm_rows(inst: &Instance, seed: u64) -> Result<(Vec<PmVector>, Vec<PmVector>, f64)> {
    if let (PlantedLaw::Rho(rho), Rows::Bits(xs), Rows::Bits(ys)) = (&inst.law, &inst.x, &inst.y) {
        return Ok((xs.clone(), ys.clone(), *rho));
    }
    let p = inst.law.distribution()?;
    let m = map_to_pm1(&p)?;
    let (xs, ys) = m.apply(inst, seed);
    Ok((xs, ys, m.rho_out))
}

/// Whether the first `big_n` coordinates of `(x, y)` hit every symbol pair
/// exactly `P[i,j] * big_n` times (rounded to the nearest integer).
pub fn check_vn(x: &[u8], y: &[u8], p: &JointDistribution, big_n: usize) -> bool {
    let q = p.q();
    if x.len() < big_n || y.len() < big_n {
        return false;
    }
    let mut counts = vec![0usize; q * q];
    for l in 0..big_n {
        let (a, b) = (x[l] as usize, y[l] as usize);
        if a >= q || b >= q {
            return false;
        }
        counts[a * q + b] += 1;
    }
    (0..q * q).all(|f| counts[f] as f64 == libm::round(p.get(f / q, f % q) * big_n as f64))
}
