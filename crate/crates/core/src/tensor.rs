//! Tensors, rank decompositions and their application to matrices.
//!
//! A tensor of shape `<qi, qj, qk>` is stored densely, indexed by the three
//! flattened variable indices `x = i*qk + k`, `y = j*qk + k'` and
//! `z = i'*qj + j'`. Decompositions store one `(alpha, beta, gamma)` triple
//! per rank-1 term over the same flattened indices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scalar};

/// Default cap on the number of dense coefficients a single tensor may hold.
pub const DEFAULT_ELEMENT_BUDGET: u128 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TensorShape {
    pub qi: usize,
    pub qj: usize,
    pub qk: usize,
}

impl TensorShape {
    pub fn new(qi: usize, qj: usize, qk: usize) -> Result<Self> {
        if qi == 0 || qj == 0 || qk == 0 {
            return Err(Error::domain(format!("tensor shape <{qi},{qj},{qk}> has a zero side")));
        }
        Ok(TensorShape { qi, qj, qk })
    }

    /// Square shape `<q, q, qk>`.
    pub fn square(q: usize, qk: usize) -> Result<Self> {
        Self::new(q, q, qk)
    }

    pub fn x_len(&self) -> usize {
        self.qi * self.qk
    }

    pub fn y_len(&self) -> usize {
        self.qj * self.qk
    }

    pub fn z_len(&self) -> usize {
        self.qi * self.qj
    }

    /// Number of dense coefficients, as u128 so huge powers do not overflow.
    pub fn volume(&self) -> u128 {
        self.x_len() as u128 * self.y_len() as u128 * self.z_len() as u128
    }

    pub fn kron(&self, other: &TensorShape) -> TensorShape {
        TensorShape { qi: self.qi * other.qi, qj: self.qj * other.qj, qk: self.qk * other.qk }
    }

    pub fn pow(&self, n: u32) -> TensorShape {
        TensorShape { qi: self.qi.pow(n), qj: self.qj.pow(n), qk: self.qk.pow(n) }
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.qi, self.qj, self.qk)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: TensorShape,
    coeff: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: TensorShape) -> Result<Self> {
        Self::zeros_with_budget(shape, DEFAULT_ELEMENT_BUDGET)
    }

    pub fn zeros_with_budget(shape: TensorShape, budget: u128) -> Result<Self> {
        let needed = shape.volume();
        if needed > budget {
            return Err(Error::Capacity { needed, budget });
        }
        Ok(Tensor { shape, coeff: vec![0.0; needed as usize] })
    }

    pub fn from_coefficients(shape: TensorShape, coeff: Vec<f64>) -> Result<Self> {
        if coeff.len() as u128 != shape.volume() {
            return Err(Error::shape(shape.volume(), coeff.len()));
        }
        if coeff.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("tensor coefficients must be finite"));
        }
        Ok(Tensor { shape, coeff })
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeff
    }

    #[inline]
    fn flat(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.shape.y_len() + y) * self.shape.z_len() + z
    }

    /// Coefficient addressed by flattened variable indices.
    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.coeff[self.flat(x, y, z)]
    }

    /// Coefficient of `X[i,k] Y[j,k2] Z[i2,j2]`.
    pub fn get(&self, i: usize, k: usize, j: usize, k2: usize, i2: usize, j2: usize) -> f64 {
        let s = self.shape;
        self.at(i * s.qk + k, j * s.qk + k2, i2 * s.qj + j2)
    }

    pub fn set(&mut self, i: usize, k: usize, j: usize, k2: usize, i2: usize, j2: usize, v: f64) {
        let s = self.shape;
        let f = self.flat(i * s.qk + k, j * s.qk + k2, i2 * s.qj + j2);
        self.coeff[f] = v;
    }

    pub fn add_at(&mut self, x: usize, y: usize, z: usize, v: f64) {
        let f = self.flat(x, y, z);
        self.coeff[f] += v;
    }

    /// Nonzero coefficients as `(x, y, z, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, usize, f64)> {
        let (yl, zl) = (self.shape.y_len(), self.shape.z_len());
        self.coeff
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(f, &c)| (f / (yl * zl), (f / zl) % yl, f % zl, c))
            .collect()
    }

    pub fn nnz(&self) -> usize {
        self.coeff.iter().filter(|c| **c != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.iter().all(|c| *c == 0.0)
    }

    /// True when every nonzero coefficient sits on the matrix multiplication
    /// support `i' = i, j' = j, k' = k`.
    pub fn is_subset_of_matmul(&self) -> bool {
        let s = self.shape;
        self.nonzeros().into_iter().all(|(x, y, z, _)| {
            let (i, k) = (x / s.qk, x % s.qk);
            let (j, k2) = (y / s.qk, y % s.qk);
            k == k2 && z == i * s.qj + j
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.coeff.iter().map(|c| libm::fabs(*c)).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::shape(self.shape, other.shape));
        }
        Ok(self
            .coeff
            .iter()
            .zip(&other.coeff)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max))
    }

    /// Largest entrywise error relative to the largest coefficient magnitude.
    pub fn relative_diff(&self, other: &Tensor) -> Result<f64> {
        let scale = self.max_abs().max(other.max_abs());
        let d = self.max_abs_diff(other)?;
        Ok(if scale == 0.0 { d } else { d / scale })
    }

    pub fn kronecker(&self, other: &Tensor) -> Result<Tensor> {
        self.kronecker_with_budget(other, DEFAULT_ELEMENT_BUDGET)
    }

    pub fn kronecker_with_budget(&self, other: &Tensor, budget: u128) -> Result<Tensor> {
        let shape = self.shape.kron(&other.shape);
        let mut out = Tensor::zeros_with_budget(shape, budget)?;
        let (a, b) = (self.shape, other.shape);
        let rhs = other.nonzeros();
        for (x1, y1, z1, c1) in self.nonzeros() {
            for &(x2, y2, z2, c2) in &rhs {
                let x = pair_index(x1, x2, (a.qi, a.qk), (b.qi, b.qk));
                let y = pair_index(y1, y2, (a.qj, a.qk), (b.qj, b.qk));
                let z = pair_index(z1, z2, (a.qi, a.qj), (b.qi, b.qj));
                let f = out.flat(x, y, z);
                out.coeff[f] = c1 * c2;
            }
        }
        Ok(out)
    }

    /// `T^{(x)n}`; the zeroth power is the 1x1x1 unit tensor.
    pub fn power(&self, n: u32) -> Result<Tensor> {
        let mut acc = Tensor::from_coefficients(TensorShape { qi: 1, qj: 1, qk: 1 }, vec![1.0])?;
        for _ in 0..n {
            acc = acc.kronecker(self)?;
        }
        Ok(acc)
    }

    /// Reflection: swaps the roles of X and Y and transposes Z, so that
    /// `T'(X[i,k] Y[j,k'] Z[i',j']) = T(X[j,k'] Y[i,k] Z[j',i'])`.
    pub fn reflect(&self) -> Result<Tensor> {
        let s = self.shape;
        if s.qi != s.qj {
            return Err(Error::shape("q_i = q_j", s));
        }
        let mut out = Tensor::zeros(s)?;
        for (x, y, z, c) in self.nonzeros() {
            let z_t = (z % s.qj) * s.qj + z / s.qj;
            let f = out.flat(y, x, z_t);
            out.coeff[f] = c;
        }
        Ok(out)
    }

    /// `C[i,j] = sum T(X[i',k] Y[j',k'] Z[i,j]) A[i',k] B[j',k']`.
    pub fn apply_direct<S: Scalar>(&self, a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
        let s = self.shape;
        if (a.rows(), a.cols()) != (s.qi, s.qk) {
            return Err(Error::shape(format!("A {}x{}", s.qi, s.qk), format!("{}x{}", a.rows(), a.cols())));
        }
        if (b.rows(), b.cols()) != (s.qj, s.qk) {
            return Err(Error::shape(format!("B {}x{}", s.qj, s.qk), format!("{}x{}", b.rows(), b.cols())));
        }
        let mut c = Matrix::<S>::zeros(s.qi, s.qj);
        let (av, bv) = (a.data(), b.data());
        for (x, y, z, coef) in self.nonzeros() {
            let t = S::from_coeff(coef)
                .ok_or_else(|| Error::domain(format!("coefficient {coef} is not representable")))?;
            let cz = &mut c.data_mut()[z];
            *cz += t * av[x] * bv[y];
        }
        Ok(c)
    }
}

/// Row-major pairing of two matrix-shaped indices under a Kronecker product.
fn pair_index(u: usize, v: usize, (ur, uc): (usize, usize), (vr, vc): (usize, usize)) -> usize {
    let (r1, c1) = (u / uc, u % uc);
    let (r2, c2) = (v / vc, v % vc);
    let _ = ur;
    (r1 * vr + r2) * (uc * vc) + (c1 * vc + c2)
}

fn kron_vector(u: &[f64], v: &[f64], ushape: (usize, usize), vshape: (usize, usize)) -> Vec<f64> {
    let mut out = vec![0.0; u.len() * v.len()];
    for (a, &cu) in u.iter().enumerate() {
        if cu == 0.0 {
            continue;
        }
        for (b, &cv) in v.iter().enumerate() {
            out[pair_index(a, b, ushape, vshape)] = cu * cv;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rank1Term {
    /// Coefficients over `X[i,k]`, flattened `i*qk + k`.
    pub alpha: Vec<f64>,
    /// Coefficients over `Y[j,k]`, flattened `j*qk + k`.
    pub beta: Vec<f64>,
    /// Coefficients over `Z[i,j]`, flattened `i*qj + j`.
    pub gamma: Vec<f64>,
}

impl Rank1Term {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Self {
        Rank1Term { alpha, beta, gamma }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    shape: TensorShape,
    terms: Vec<Rank1Term>,
}

impl Decomposition {
    pub fn new(shape: TensorShape, terms: Vec<Rank1Term>) -> Result<Self> {
        for (idx, t) in terms.iter().enumerate() {
            if t.alpha.len() != shape.x_len() || t.beta.len() != shape.y_len() || t.gamma.len() != shape.z_len() {
                return Err(Error::shape(
                    format!("term lengths ({}, {}, {})", shape.x_len(), shape.y_len(), shape.z_len()),
                    format!("term {idx} with ({}, {}, {})", t.alpha.len(), t.beta.len(), t.gamma.len()),
                ));
            }
            let finite = t.alpha.iter().chain(&t.beta).chain(&t.gamma).all(|c| c.is_finite());
            if !finite {
                return Err(Error::domain(format!("term {idx} has a non-finite coefficient")));
            }
        }
        Ok(Decomposition { shape, terms })
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn terms(&self) -> &[Rank1Term] {
        &self.terms
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn is_integral(&self) -> bool {
        self.terms
            .iter()
            .flat_map(|t| t.alpha.iter().chain(&t.beta).chain(&t.gamma))
            .all(|c| libm::trunc(*c) == *c)
    }

    /// Expands the terms into a dense tensor.
    pub fn to_tensor(&self) -> Result<Tensor> {
        let mut out = Tensor::zeros(self.shape)?;
        for t in &self.terms {
            for (x, &a) in t.alpha.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (y, &b) in t.beta.iter().enumerate() {
                    if b == 0.0 {
                        continue;
                    }
                    for (z, &c) in t.gamma.iter().enumerate() {
                        if c != 0.0 {
                            out.add_at(x, y, z, a * b * c);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Term-by-term Kronecker product; rank multiplies.
    pub fn kron(&self, other: &Decomposition) -> Result<Decomposition> {
        let (a, b) = (self.shape, other.shape);
        let shape = a.kron(&b);
        let terms_needed = self.rank() as u128 * other.rank() as u128;
        let per_term = (shape.x_len() + shape.y_len() + shape.z_len()) as u128;
        if terms_needed * per_term > DEFAULT_ELEMENT_BUDGET {
            return Err(Error::Capacity { needed: terms_needed * per_term, budget: DEFAULT_ELEMENT_BUDGET });
        }
        let mut terms = Vec::with_capacity(terms_needed as usize);
        for t1 in &self.terms {
            for t2 in &other.terms {
                terms.push(Rank1Term {
                    alpha: kron_vector(&t1.alpha, &t2.alpha, (a.qi, a.qk), (b.qi, b.qk)),
                    beta: kron_vector(&t1.beta, &t2.beta, (a.qj, a.qk), (b.qj, b.qk)),
                    gamma: kron_vector(&t1.gamma, &t2.gamma, (a.qi, a.qj), (b.qi, b.qj)),
                });
            }
        }
        Decomposition::new(shape, terms)
    }

    /// `D^{(x)n}`; the zeroth power is the single unit term of shape <1,1,1>.
    pub fn power(&self, n: u32) -> Result<Decomposition> {
        let mut acc = Decomposition::unit();
        for _ in 0..n {
            acc = acc.kron(self)?;
        }
        Ok(acc)
    }

    pub fn unit() -> Decomposition {
        Decomposition {
            shape: TensorShape { qi: 1, qj: 1, qk: 1 },
            terms: vec![Rank1Term::new(vec![1.0], vec![1.0], vec![1.0])],
        }
    }

    /// Decomposition of the reflected tensor: alpha and beta trade places and
    /// gamma is transposed.
    pub fn reflect(&self) -> Result<Decomposition> {
        let s = self.shape;
        if s.qi != s.qj {
            return Err(Error::shape("q_i = q_j", s));
        }
        let q = s.qi;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut gamma = vec![0.0; t.gamma.len()];
                for i in 0..q {
                    for j in 0..q {
                        gamma[i * q + j] = t.gamma[j * q + i];
                    }
                }
                Rank1Term { alpha: t.beta.clone(), beta: t.alpha.clone(), gamma }
            })
            .collect();
        Ok(Decomposition { shape: s, terms })
    }

    /// Applies `D^{(x)n}` to `A` and `B` through the recursive algorithm.
    pub fn apply_power<S: Scalar>(
        &self,
        n: usize,
        a: &Matrix<S>,
        b: &Matrix<S>,
        opts: ApplyOptions,
    ) -> Result<(Matrix<S>, ApplyStats)> {
        let levels = vec![self; n];
        apply_levels(&levels, a, b, opts)
    }
}

/// `d1^{(x)a} (x) d2^{(x)b}`.
pub fn blend_decomposition(d1: &Decomposition, a: u32, d2: &Decomposition, b: u32) -> Result<Decomposition> {
    d1.power(a)?.kron(&d2.power(b)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApplyOptions {
    /// Number of trailing levels handed to the leaf kernel (at least 1).
    pub cutoff: usize,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions { cutoff: 5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ApplyStats {
    /// Scalar products of a transformed A entry with a transformed B entry.
    pub multiplications: u64,
}

/// Sparse coefficient list of one factor of one term.
type Sparse<S> = Vec<(usize, S)>;

struct Level<S> {
    x_len: usize,
    y_len: usize,
    z_len: usize,
    alpha: Vec<Sparse<S>>,
    beta: Vec<Sparse<S>>,
    gamma: Vec<Sparse<S>>,
    /// gamma transposed: for each z, the terms feeding it.
    gamma_by_z: Vec<Sparse<S>>,
    live: Vec<bool>,
}

fn sparse<S: Scalar>(v: &[f64]) -> Result<Sparse<S>> {
    v.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, &c)| {
            S::from_coeff(c)
                .map(|s| (i, s))
                .ok_or_else(|| Error::domain(format!("coefficient {c} is not representable in this scalar type")))
        })
        .collect()
}

impl<S: Scalar> Level<S> {
    fn compile(d: &Decomposition) -> Result<Self> {
        let s = d.shape();
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        let mut gamma = Vec::new();
        let mut live = Vec::new();
        for t in d.terms() {
            let (a, b, g) = (sparse::<S>(&t.alpha)?, sparse::<S>(&t.beta)?, sparse::<S>(&t.gamma)?);
            live.push(!a.is_empty() && !b.is_empty() && !g.is_empty());
            alpha.push(a);
            beta.push(b);
            gamma.push(g);
        }
        let mut gamma_by_z = vec![Vec::new(); s.z_len()];
        for (r, g) in gamma.iter().enumerate() {
            if !live[r] {
                continue;
            }
            for &(z, c) in g {
                gamma_by_z[z].push((r, c));
            }
        }
        Ok(Level { x_len: s.x_len(), y_len: s.y_len(), z_len: s.z_len(), alpha, beta, gamma, gamma_by_z, live })
    }

    fn rank(&self) -> usize {
        self.alpha.len()
    }
}

struct Scratch<S> {
    s: Vec<S>,
    t: Vec<S>,
    m: Vec<S>,
}

/// Applies the Kronecker product of `levels` (outermost first) to `A` and `B`.
///
/// Upper levels run depth-first over contiguous blocks. The last
/// `opts.cutoff` levels go to a leaf kernel that transforms whole leaf blocks
/// with mode products, multiplies them entrywise and transforms back. Either
/// way every product of a transformed A entry with a transformed B entry is
/// counted, so the counter equals the product of the level ranks.
pub fn apply_levels<S: Scalar>(
    levels: &[&Decomposition],
    a: &Matrix<S>,
    b: &Matrix<S>,
    opts: ApplyOptions,
) -> Result<(Matrix<S>, ApplyStats)> {
    let shapes: Vec<TensorShape> = levels.iter().map(|d| d.shape()).collect();
    let rows_a: usize = shapes.iter().map(|s| s.qi).product();
    let rows_b: usize = shapes.iter().map(|s| s.qj).product();
    let cols: usize = shapes.iter().map(|s| s.qk).product();
    if (a.rows(), a.cols()) != (rows_a, cols) {
        return Err(Error::shape(format!("A {rows_a}x{cols}"), format!("{}x{}", a.rows(), a.cols())));
    }
    if (b.rows(), b.cols()) != (rows_b, cols) {
        return Err(Error::shape(format!("B {rows_b}x{cols}"), format!("{}x{}", b.rows(), b.cols())));
    }
    if levels.is_empty() {
        let mut c = Matrix::zeros(1, 1);
        c.set(0, 0, a.get(0, 0) * b.get(0, 0));
        return Ok((c, ApplyStats { multiplications: 1 }));
    }
    let compiled: Vec<Level<S>> = levels.iter().map(|d| Level::compile(d)).collect::<Result<_>>()?;

    let ia = interleave_table(&shapes, |s| (s.qi, s.qk));
    let ib = interleave_table(&shapes, |s| (s.qj, s.qk));
    let ic = interleave_table(&shapes, |s| (s.qi, s.qj));
    let av = to_interleaved(a, &ia);
    let bv = to_interleaved(b, &ib);

    let n = levels.len();
    let cutoff = opts.cutoff.clamp(1, n);
    let split = n - cutoff;
    let mut scratch: Vec<Scratch<S>> = Vec::with_capacity(split);
    for l in 0..split {
        let sub = |f: fn(&TensorShape) -> usize| shapes[l + 1..].iter().map(f).product::<usize>();
        scratch.push(Scratch {
            s: vec![S::ZERO; sub(TensorShape::x_len)],
            t: vec![S::ZERO; sub(TensorShape::y_len)],
            m: vec![S::ZERO; sub(TensorShape::z_len)],
        });
    }
    let mut leaf = Leaf::new(&compiled[split..]);
    let mut cv = vec![S::ZERO; rows_a * rows_b];
    let mut stats = ApplyStats::default();
    recurse(&compiled, 0, split, &av, &bv, &mut cv, &mut scratch, &mut leaf, &mut stats);
    Ok((from_interleaved(&cv, &ic, rows_a, rows_b), stats))
}

#[allow(clippy::too_many_arguments)]
fn recurse<S: Scalar>(
    levels: &[Level<S>],
    depth: usize,
    split: usize,
    a: &[S],
    b: &[S],
    c: &mut [S],
    scratch: &mut [Scratch<S>],
    leaf: &mut Leaf<S>,
    stats: &mut ApplyStats,
) {
    if depth == split {
        leaf.run(a, b, c, stats);
        return;
    }
    let lv = &levels[depth];
    let (cur, rest) = scratch.split_first_mut().expect("scratch sized to split depth");
    let (sa, sb, sc) = (a.len() / lv.x_len, b.len() / lv.y_len, c.len() / lv.z_len);
    c.fill(S::ZERO);
    for r in 0..lv.rank() {
        if !lv.live[r] {
            // a zero factor: nothing to compute, but the count is by rank
            stats.multiplications += levels[depth + 1..].iter().map(|l| l.rank() as u64).product::<u64>();
            continue;
        }
        combine(&lv.alpha[r], a, sa, &mut cur.s);
        combine(&lv.beta[r], b, sb, &mut cur.t);
        recurse(levels, depth + 1, split, &cur.s, &cur.t, &mut cur.m, rest, leaf, stats);
        for &(z, g) in &lv.gamma[r] {
            axpy(&mut c[z * sc..(z + 1) * sc], g, &cur.m);
        }
    }
}

/// `out = sum coef * src[idx-th block]`.
fn combine<S: Scalar>(coeffs: &Sparse<S>, src: &[S], block: usize, out: &mut [S]) {
    let mut first = true;
    for &(idx, c) in coeffs {
        let chunk = &src[idx * block..(idx + 1) * block];
        if first {
            if c == S::ONE {
                out.copy_from_slice(chunk);
            } else {
                for (o, &v) in out.iter_mut().zip(chunk) {
                    *o = c * v;
                }
            }
            first = false;
        } else {
            axpy(out, c, chunk);
        }
    }
}

#[inline]
fn axpy<S: Scalar>(out: &mut [S], c: S, src: &[S]) {
    if c == S::ONE {
        for (o, &v) in out.iter_mut().zip(src) {
            *o += v;
        }
    } else if c == -S::ONE {
        for (o, &v) in out.iter_mut().zip(src) {
            *o = *o - v;
        }
    } else {
        for (o, &v) in out.iter_mut().zip(src) {
            *o += c * v;
        }
    }
}

/// Leaf kernel over the trailing levels.
struct Leaf<S> {
    x_dims: Vec<usize>,
    y_dims: Vec<usize>,
    ranks: Vec<usize>,
    alpha: Vec<Vec<Sparse<S>>>,
    beta: Vec<Vec<Sparse<S>>>,
    gamma: Vec<Vec<Sparse<S>>>,
    buf: [Vec<S>; 2],
    u: Vec<S>,
    tile: Vec<S>,
}

/// Rows per tile in [`rotate_product`].
const TILE: usize = 128;

impl<S: Scalar> Leaf<S> {
    fn new(levels: &[Level<S>]) -> Self {
        // Every intermediate of the axis-by-axis transforms fits in this.
        let cap = levels
            .iter()
            .map(|l| l.rank().max(l.x_len).max(l.y_len).max(l.z_len))
            .product::<usize>();
        let widest = levels.iter().map(|l| l.rank().max(l.z_len)).max().unwrap_or(1);
        Leaf {
            x_dims: levels.iter().map(|l| l.x_len).collect(),
            y_dims: levels.iter().map(|l| l.y_len).collect(),
            ranks: levels.iter().map(|l| l.rank()).collect(),
            alpha: levels.iter().map(|l| l.alpha.clone()).collect(),
            beta: levels.iter().map(|l| l.beta.clone()).collect(),
            gamma: levels.iter().map(|l| l.gamma_by_z.clone()).collect(),
            buf: [vec![S::ZERO; cap], vec![S::ZERO; cap]],
            u: vec![S::ZERO; cap],
            tile: vec![S::ZERO; widest * TILE],
        }
    }

    fn run(&mut self, a: &[S], b: &[S], c: &mut [S], stats: &mut ApplyStats) {
        let total_rank: usize = self.ranks.iter().product();
        let [b0, b1] = &mut self.buf;
        b0[..a.len()].copy_from_slice(a);
        transform(&self.x_dims, &self.alpha, b0, b1, &mut self.tile);
        self.u[..total_rank].copy_from_slice(&b0[..total_rank]);
        b0[..b.len()].copy_from_slice(b);
        transform(&self.y_dims, &self.beta, b0, b1, &mut self.tile);
        for (w, &u) in b0[..total_rank].iter_mut().zip(&self.u[..total_rank]) {
            *w = *w * u;
        }
        stats.multiplications += total_rank as u64;
        transform(&self.ranks, &self.gamma, b0, b1, &mut self.tile);
        c.copy_from_slice(&b0[..c.len()]);
    }
}

/// Applies `maps[l]` along axis `l` of the tensor held in `data` (axes
/// `dims`). Each step contracts the leading axis and appends the result
/// axis at the back, so after one pass per axis the order is restored and
/// every contraction runs over long contiguous rows. The result ends in
/// `data`.
fn transform<S: Scalar>(dims: &[usize], maps: &[Vec<Sparse<S>>], data: &mut Vec<S>, tmp: &mut Vec<S>, tile: &mut [S]) {
    let mut len: usize = dims.iter().product();
    for (axis, &din) in dims.iter().enumerate() {
        let rest = len / din;
        let dout = maps[axis].len();
        rotate_product(&data[..len], &mut tmp[..rest * dout], rest, &maps[axis], tile);
        len = rest * dout;
        core::mem::swap(data, tmp);
    }
}

/// `out[p, r] = sum_x map[r][x] * input[x, p]` for `p < rest`.
fn rotate_product<S: Scalar>(input: &[S], out: &mut [S], rest: usize, map: &[Sparse<S>], tile: &mut [S]) {
    let dout = map.len();
    let mut p0 = 0;
    while p0 < rest {
        let w = TILE.min(rest - p0);
        for (r, row) in map.iter().enumerate() {
            let dst = &mut tile[r * TILE..r * TILE + w];
            let mut first = true;
            for &(x, c) in row {
                let src = &input[x * rest + p0..x * rest + p0 + w];
                if first {
                    if c == S::ONE {
                        dst.copy_from_slice(src);
                    } else if c == -S::ONE {
                        for (o, &v) in dst.iter_mut().zip(src) {
                            *o = -v;
                        }
                    } else {
                        for (o, &v) in dst.iter_mut().zip(src) {
                            *o = c * v;
                        }
                    }
                    first = false;
                } else {
                    axpy(dst, c, src);
                }
            }
            if first {
                dst.fill(S::ZERO);
            }
        }
        for (p, dst) in out[p0 * dout..(p0 + w) * dout].chunks_exact_mut(dout).enumerate() {
            for (r, d) in dst.iter_mut().enumerate() {
                *d = tile[r * TILE + p];
            }
        }
        p0 += w;
    }
}

/// `(M_1 (x) ... (x) M_N) v`, with `v` indexed row-major by the input
/// index of every factor.
pub fn kron_matvec(mats: &[&Matrix<f64>], v: &[f64]) -> Result<Vec<f64>> {
    let dims: Vec<usize> = mats.iter().map(|m| m.cols()).collect();
    let len_in: usize = dims.iter().product();
    if v.len() != len_in {
        return Err(Error::shape(format!("vector of length {len_in}"), v.len()));
    }
    let maps: Vec<Vec<Sparse<f64>>> = mats
        .iter()
        .map(|m| (0..m.rows()).map(|r| m.row(r).iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect()).collect())
        .collect();
    let cap = mats.iter().map(|m| m.rows().max(m.cols())).product::<usize>().max(1);
    let widest = mats.iter().map(|m| m.rows()).max().unwrap_or(1);
    let mut data = vec![0.0; cap];
    let mut tmp = vec![0.0; cap];
    let mut tile = vec![0.0; widest * TILE];
    data[..len_in].copy_from_slice(v);
    transform(&dims, &maps, &mut data, &mut tmp, &mut tile);
    data.truncate(mats.iter().map(|m| m.rows()).product());
    Ok(data)
}

/// Offsets of each row and each column of a Kronecker-structured matrix in
/// the level-interleaved layout `(r_0, c_0, r_1, c_1, ...)`.
struct InterleaveTable {
    row_off: Vec<usize>,
    col_off: Vec<usize>,
}

fn interleave_table(shapes: &[TensorShape], dims: impl Fn(&TensorShape) -> (usize, usize)) -> InterleaveTable {
    let d: Vec<(usize, usize)> = shapes.iter().map(dims).collect();
    let n = d.len();
    // stride of level l's (r_l, c_l) pair in the interleaved layout
    let mut stride = vec![1usize; n];
    for l in (0..n.saturating_sub(1)).rev() {
        stride[l] = stride[l + 1] * d[l + 1].0 * d[l + 1].1;
    }
    let rows: usize = d.iter().map(|p| p.0).product();
    let cols: usize = d.iter().map(|p| p.1).product();
    let digits = |mut v: usize, f: &dyn Fn(usize, usize) -> usize, pick: fn(&(usize, usize)) -> usize| {
        let mut off = 0;
        for l in (0..n).rev() {
            let base = pick(&d[l]);
            off += f(l, v % base);
            v /= base;
        }
        off
    };
    let row_off = (0..rows).map(|r| digits(r, &|l, digit| digit * d[l].1 * stride[l], |p| p.0)).collect();
    let col_off = (0..cols).map(|c| digits(c, &|l, digit| digit * stride[l], |p| p.1)).collect();
    InterleaveTable { row_off, col_off }
}

fn to_interleaved<S: Scalar>(m: &Matrix<S>, t: &InterleaveTable) -> Vec<S> {
    let mut out = vec![S::ZERO; m.rows() * m.cols()];
    for r in 0..m.rows() {
        let base = t.row_off[r];
        for (c, &v) in m.row(r).iter().enumerate() {
            out[base + t.col_off[c]] = v;
        }
    }
    out
}

fn from_interleaved<S: Scalar>(v: &[S], t: &InterleaveTable, rows: usize, cols: usize) -> Matrix<S> {
    Matrix::from_fn(rows, cols, |r, c| v[t.row_off[r] + t.col_off[c]])
}
