//! Exact application of decompositions with rational coefficients.
//!
//! Decompositions built from a small parameter such as `T2112(eps)` have
//! coefficients up to `eps^-5` whose contributions cancel almost entirely,
//! so evaluating them in `f64` leaves nothing but rounding noise after a few
//! levels. For integer inputs we instead scale every factor of every level
//! to integers, run the recursive algorithm once per residue channel
//! (modulo `2^64` and modulo primes just below `2^64`), glue the channels
//! back with the Chinese remainder theorem and divide the scale out at the
//! very end.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::num::Wrapping;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Scalar};
use crate::tensor::{apply_levels, ApplyOptions, ApplyStats, Decomposition, Rank1Term};

/// `c` such that `2^64 - c` is prime, in the order channels are added.
const PRIME_OFFSETS: [u64; 6] = [59, 83, 95, 179, 189, 257];

/// Largest denominator accepted when reading a coefficient as a fraction.
const MAX_DENOMINATOR: i128 = 1 << 40;

/// Largest scaled coefficient, so that it survives the trip through `f64`.
const MAX_SCALED: f64 = 9.0e15;

/// `a * b mod (2^64 - c)` for `a, b < 2^64 - c` and small `c`.
#[inline]
fn mul_mod(a: u64, b: u64, c: u64) -> u64 {
    let x = a as u128 * b as u128;
    reduce(x, c)
}

#[inline]
fn reduce(x: u128, c: u64) -> u64 {
    // 2^64 = c, applied twice
    let t = (x >> 64) * c as u128 + (x as u64) as u128;
    let (hi, lo) = ((t >> 64) as u64, t as u64);
    let (r, over) = lo.overflowing_add(hi * c);
    finish(r.wrapping_add(c & (over as u64).wrapping_neg()), c)
}

/// Final correction of a value below `2^64`. Values at or above `p` are
/// rare enough that the branch predicts well.
#[inline]
fn finish(r: u64, c: u64) -> u64 {
    let p = c.wrapping_neg();
    if r >= p {
        r - p
    } else {
        r
    }
}

// Overflow happens about half the time with a prime this close to 2^64,
// so the wrap-around correction is a mask rather than a branch.
#[inline]
fn add_mod(a: u64, b: u64, c: u64) -> u64 {
    let (s, over) = a.overflowing_add(b);
    finish(s.wrapping_add(c & (over as u64).wrapping_neg()), c)
}

#[inline]
fn sub_mod(a: u64, b: u64, c: u64) -> u64 {
    let (s, borrow) = a.overflowing_sub(b);
    s.wrapping_sub(c & (borrow as u64).wrapping_neg())
}

fn residue(v: i128, c: u64) -> u64 {
    let p = c.wrapping_neg() as i128;
    v.rem_euclid(p) as u64
}

/// Residue modulo the prime `2^64 - C`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModP<const C: u64>(pub u64);

impl<const C: u64> Add for ModP<C> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        ModP(add_mod(self.0, o.0, C))
    }
}

impl<const C: u64> Sub for ModP<C> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        ModP(sub_mod(self.0, o.0, C))
    }
}

impl<const C: u64> Mul for ModP<C> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        ModP(mul_mod(self.0, o.0, C))
    }
}

impl<const C: u64> Neg for ModP<C> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        ModP(sub_mod(0, self.0, C))
    }
}

impl<const C: u64> AddAssign for ModP<C> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<const C: u64> Scalar for ModP<C> {
    const ZERO: Self = ModP(0);
    const ONE: Self = ModP(1);

    fn from_coeff(c: f64) -> Option<Self> {
        if c.is_finite() && libm::trunc(c) == c && libm::fabs(c) < MAX_SCALED {
            Some(ModP(residue(c as i128, C)))
        } else {
            None
        }
    }

    /// The canonical representative, not a signed value.
    fn to_f64(self) -> f64 {
        self.0 as f64
    }
}

/// Arithmetic modulo 2^64.
impl Scalar for Wrapping<i64> {
    const ZERO: Self = Wrapping(0);
    const ONE: Self = Wrapping(1);

    fn from_coeff(c: f64) -> Option<Self> {
        if c.is_finite() && libm::trunc(c) == c && libm::fabs(c) < MAX_SCALED {
            Some(Wrapping(c as i64))
        } else {
            None
        }
    }

    fn to_f64(self) -> f64 {
        self.0 as f64
    }
}

/// Best fraction `p/q` for `c` with `q <= MAX_DENOMINATOR`, if it is exact
/// to a relative `1e-12`.
fn as_fraction(c: f64) -> Option<(i128, i128)> {
    let tol = 1e-12 * libm::fabs(c).max(1e-300);
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut x = libm::fabs(c);
    for _ in 0..64 {
        let a = libm::floor(x);
        if a > 1e18 {
            break;
        }
        let a = a as i128;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > MAX_DENOMINATOR {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if libm::fabs(p1 as f64 / q1 as f64 - libm::fabs(c)) <= tol {
            let sign = if c < 0.0 { -1 } else { 1 };
            return Some((sign * p1, q1));
        }
        let frac = x - a as f64;
        if frac == 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Smallest multiplier turning every entry of `vals` into an integer.
fn common_denominator<'a>(vals: impl Iterator<Item = &'a f64>) -> Result<i128> {
    let mut lcm = 1i128;
    for &v in vals {
        if v == 0.0 {
            continue;
        }
        let (_, q) = as_fraction(v).ok_or_else(|| Error::domain(format!("coefficient {v} is not a short fraction")))?;
        lcm = lcm / gcd(lcm, q) * q;
        if lcm > MAX_DENOMINATOR {
            return Err(Error::domain("common denominator of a factor is too large"));
        }
    }
    Ok(lcm)
}

/// One level with integer coefficients and the scale that was applied.
struct ScaledLevel {
    decomposition: Decomposition,
    /// `decomposition = scale * original`.
    scale: f64,
    /// `max_z sum_{x,y} |T(x,y,z)|` of the scaled tensor.
    z_mass: f64,
}

fn scale_level(d: &Decomposition) -> Result<ScaledLevel> {
    let s = d.shape();
    let la = common_denominator(d.terms().iter().flat_map(|t| t.alpha.iter()))?;
    let lb = common_denominator(d.terms().iter().flat_map(|t| t.beta.iter()))?;
    let lg = common_denominator(d.terms().iter().flat_map(|t| t.gamma.iter()))?;
    let mut ints = Vec::with_capacity(d.rank());
    let mut terms = Vec::with_capacity(d.rank());
    for t in d.terms() {
        let conv = |v: &[f64], l: i128| -> Result<Vec<i128>> {
            v.iter()
                .map(|&c| {
                    if c == 0.0 {
                        return Ok(0);
                    }
                    let (p, q) = as_fraction(c).ok_or_else(|| Error::domain("coefficient is not a short fraction"))?;
                    Ok(p * (l / q))
                })
                .collect()
        };
        let (a, b, g) = (conv(&t.alpha, la)?, conv(&t.beta, lb)?, conv(&t.gamma, lg)?);
        let to_f = |v: &[i128]| -> Result<Vec<f64>> {
            v.iter()
                .map(|&c| {
                    let f = c as f64;
                    if libm::fabs(f) >= MAX_SCALED {
                        Err(Error::domain(format!("scaled coefficient {c} is too large")))
                    } else {
                        Ok(f)
                    }
                })
                .collect()
        };
        terms.push(Rank1Term::new(to_f(&a)?, to_f(&b)?, to_f(&g)?));
        ints.push((a, b, g));
    }
    // exact scaled tensor, for the magnitude bound
    let mut t = vec![0i128; s.x_len() * s.y_len() * s.z_len()];
    for (a, b, g) in &ints {
        for (x, &ca) in a.iter().enumerate().filter(|(_, c)| **c != 0) {
            for (y, &cb) in b.iter().enumerate().filter(|(_, c)| **c != 0) {
                for (z, &cg) in g.iter().enumerate().filter(|(_, c)| **c != 0) {
                    t[(x * s.y_len() + y) * s.z_len() + z] += ca * cb * cg;
                }
            }
        }
    }
    let mut mass = vec![0f64; s.z_len()];
    for (idx, &v) in t.iter().enumerate() {
        mass[idx % s.z_len()] += (v.unsigned_abs()) as f64;
    }
    Ok(ScaledLevel {
        decomposition: Decomposition::new(s, terms)?,
        scale: la as f64 * lb as f64 * lg as f64,
        z_mass: mass.into_iter().fold(0.0, f64::max),
    })
}

fn max_abs(m: &Matrix<i64>) -> f64 {
    m.data().iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64
}

/// How the exact route evaluated a product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactStats {
    pub apply: ApplyStats,
    /// Residue channels run; 0 when plain `f64` was already exact.
    pub channels: usize,
}

/// `C = A B^T` through `levels`, exact up to the final rounding to `f64`.
///
/// Integral decompositions whose outputs provably stay below `2^52` run
/// once in `f64`. Everything else goes through residue channels.
pub fn apply_levels_exact(
    levels: &[&Decomposition],
    a: &Matrix<i64>,
    b: &Matrix<i64>,
    opts: ApplyOptions,
) -> Result<(Matrix<f64>, ExactStats)> {
    let scaled: Vec<ScaledLevel> = levels.iter().map(|d| scale_level(d)).collect::<Result<_>>()?;
    let log_bound = libm::log2(max_abs(a).max(1.0))
        + libm::log2(max_abs(b).max(1.0))
        + scaled.iter().map(|l| libm::log2(l.z_mass.max(1.0))).sum::<f64>();
    let integral = scaled.iter().all(|l| l.scale == 1.0);
    if integral && log_bound < 52.0 {
        let (c, apply) = apply_levels(levels, &a.map(|v| v as f64), &b.map(|v| v as f64), opts)?;
        return Ok((c, ExactStats { apply, channels: 0 }));
    }
    // signed values need |C| < M / 2
    let needed = log_bound + 2.0;
    let primes = libm::ceil((needed - 64.0).max(0.0) / 63.99) as usize;
    if primes > PRIME_OFFSETS.len() {
        return Err(Error::domain(format!("outputs need {needed:.0} bits, more than the residue channels hold")));
    }
    let decs: Vec<&Decomposition> = scaled.iter().map(|l| &l.decomposition).collect();
    let scale: f64 = scaled.iter().map(|l| l.scale).product();

    let mut residues: Vec<Vec<u64>> = Vec::with_capacity(primes + 1);
    macro_rules! channel {
        ($c:expr) => {{
            let am = a.map(|v| ModP::<$c>(residue(v as i128, $c)));
            let bm = b.map(|v| ModP::<$c>(residue(v as i128, $c)));
            let (c, _) = apply_levels(&decs, &am, &bm, opts)?;
            residues.push(c.into_vec().into_iter().map(|v| v.0).collect());
        }};
    }
    for (k, _) in PRIME_OFFSETS.iter().enumerate().take(primes) {
        match k {
            0 => channel!(59),
            1 => channel!(83),
            2 => channel!(95),
            3 => channel!(179),
            4 => channel!(189),
            _ => channel!(257),
        }
    }
    let (c2, stats) = apply_levels(&decs, &a.map(Wrapping), &b.map(Wrapping), opts)?;
    let rows = c2.rows();
    let cols = c2.cols();
    residues.push(c2.into_vec().into_iter().map(|v| v.0 as u64).collect());

    let crt = Crt::new(&PRIME_OFFSETS[..primes]);
    let out: Vec<f64> = (0..rows * cols)
        .map(|e| {
            let r: Vec<u64> = residues.iter().map(|ch| ch[e]).collect();
            crt.signed_value(&r) / scale
        })
        .collect();
    Ok((Matrix::from_vec(rows, cols, out)?, ExactStats { apply: stats, channels: primes + 1 }))
}

/// Garner reconstruction over primes `2^64 - c_i` followed by `2^64`.
struct Crt {
    offsets: Vec<u64>,
    /// `inv[i] = (p_0 ... p_{i-1})^{-1} mod p_i`.
    inv: Vec<u64>,
    /// `(p_0 ... p_{k-1})^{-1} mod 2^64`.
    inv_top: u64,
    /// Mixed radices `p_0 ... p_{i-1}` as floats.
    radix: Vec<f64>,
}

fn pow_mod(mut b: u64, mut e: u64, c: u64) -> u64 {
    let mut r = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, c);
        }
        b = mul_mod(b, b, c);
        e >>= 1;
    }
    r
}

impl Crt {
    fn new(offsets: &[u64]) -> Self {
        let mut inv = Vec::with_capacity(offsets.len());
        for (i, &c) in offsets.iter().enumerate() {
            let prod = offsets[..i].iter().fold(1u64, |acc, &cj| mul_mod(acc, residue(cj.wrapping_neg() as i128, c), c));
            inv.push(pow_mod(prod, c.wrapping_neg() - 2, c));
        }
        let prod = offsets.iter().fold(Wrapping(1u64), |acc, &c| acc * Wrapping(c.wrapping_neg()));
        // Newton iteration for the inverse of an odd number mod 2^64
        let mut x = prod;
        for _ in 0..6 {
            x = x * (Wrapping(2) - prod * x);
        }
        let mut radix = Vec::with_capacity(offsets.len() + 1);
        let mut acc = 1.0;
        for &c in offsets {
            radix.push(acc);
            acc *= c.wrapping_neg() as f64;
        }
        radix.push(acc);
        Crt { offsets: offsets.to_vec(), inv, inv_top: x.0, radix }
    }

    /// The value in `[-M/2, M/2)` with the given residues, as `f64`.
    fn signed_value(&self, r: &[u64]) -> f64 {
        let k = self.offsets.len();
        let mut digits = [0u64; 8];
        for i in 0..k {
            let c = self.offsets[i];
            // value of the digits so far, mod p_i
            let mut acc = 0u64;
            for j in (0..i).rev() {
                acc = add_mod(mul_mod(acc, self.offsets[j].wrapping_neg() % c.wrapping_neg(), c), digits[j] % c.wrapping_neg(), c);
            }
            digits[i] = mul_mod(sub_mod(r[i], acc, c), self.inv[i], c);
        }
        let mut acc = Wrapping(0u64);
        for j in (0..k).rev() {
            acc = acc * Wrapping(self.offsets[j].wrapping_neg()) + Wrapping(digits[j]);
        }
        digits[k] = ((Wrapping(r[k]) - acc) * Wrapping(self.inv_top)).0;

        let negative = digits[k] >> 63 == 1;
        let mut v = 0.0;
        for i in (0..=k).rev() {
            let m = if i == k { u64::MAX } else { self.offsets[i].wrapping_neg() - 1 };
            let d = if negative { m - digits[i] } else { digits[i] };
            v += d as f64 * self.radix[i];
        }
        if negative {
            -(v + 1.0)
        } else {
            v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_round_trip() {
        assert_eq!(as_fraction(0.25), Some((1, 4)));
        assert_eq!(as_fraction(-40.0), Some((-40, 1)));
        assert_eq!(as_fraction(0.025f64.powi(3)), Some((1, 64000)));
    }

    #[test]
    fn crt_recovers_signed_values() {
        let crt = Crt::new(&PRIME_OFFSETS[..2]);
        for v in [0i128, 1, -1, 123456789, -(1 << 100) + 7, (1 << 120) - 3] {
            let mut r: Vec<u64> = PRIME_OFFSETS[..2].iter().map(|&c| residue(v, c)).collect();
            r.push(v as u64);
            let got = crt.signed_value(&r);
            assert!((got - v as f64).abs() <= 1e-15 * (v as f64).abs().max(1.0), "{v} -> {got}");
        }
    }

    #[test]
    fn modular_ops_agree_with_wide_integers() {
        let c = 59u64;
        let p = c.wrapping_neg() as u128;
        for (a, b) in [(p as u64 - 1, p as u64 - 1), (1 << 63, 3), (12345, p as u64 - 2)] {
            assert_eq!(mul_mod(a, b, c) as u128, (a as u128 * b as u128) % p);
            assert_eq!(add_mod(a, b, c) as u128, (a as u128 + b as u128) % p);
            assert_eq!(sub_mod(a, b, c) as u128, (a as u128 + p - b as u128) % p);
        }
    }
}
