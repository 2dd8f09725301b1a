//! Concrete tensors: matrix multiplication, Strassen's rank-7 algorithm, the
//! rank-6 SW tensor and the rank-5 tensor `T2112(eps)`.
//!
//! Strassen and SW are written in the classic notation `X[r][c] Y[r][c]
//! Z[r][c]` (1-indexed) where the target is `sum X_ik Y_kj Z_ji`. In this
//! crate's convention that becomes `X_{r,c} -> X[r-1, c-1]`,
//! `Y_{r,c} -> Y[c-1, r-1]` and `Z_{r,c} -> Z[r-1, c-1]`.
//!
//! T2112 is written 0-indexed with target terms `X_ik Y_kj Z_ij`, so
//! `X_{r,c} -> X[r,c]`, `Y_{r,c} -> Y[c,r]` and `Z_{r,c} -> Z[r,c]`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::efficacy::{eff_table, exponent_bound};
use crate::error::{Error, Result};
use crate::tensor::{Decomposition, Rank1Term, Tensor, TensorShape};

/// The value used throughout when no epsilon is given.
pub const DEFAULT_EPSILON: f64 = 0.025;

/// Below this epsilon the `1/eps^5` coefficients cost more than ~1e-6
/// relative accuracy in recursive application.
pub const CONDITIONING_EPSILON: f64 = 1e-3;

/// `<q, q, qk>` with unit coefficients on `X[i,k] Y[j,k] Z[i,j]`.
pub fn matmul_tensor(q: usize, qk: usize) -> Result<Tensor> {
    let mut t = Tensor::zeros(TensorShape::square(q, qk)?)?;
    for i in 0..q {
        for j in 0..q {
            for k in 0..qk {
                t.set(i, k, j, k, i, j, 1.0);
            }
        }
    }
    Ok(t)
}

/// Which printed convention a linear form is written in.
#[derive(Clone, Copy)]
enum Notation {
    /// 1-indexed, target `X_ik Y_kj Z_ji`.
    Classic,
    /// 0-indexed, target `X_ik Y_kj Z_ij`.
    Direct,
}

/// A linear form over one variable family: `(row, col, coefficient)` as printed.
type Form<'a> = &'a [(usize, usize, f64)];

fn form_to_vec(form: Form, notation: Notation, var: char) -> Vec<f64> {
    let mut v = vec![0.0; 4];
    for &(r, c, coef) in form {
        let (r, c) = match notation {
            Notation::Classic => (r - 1, c - 1),
            Notation::Direct => (r, c),
        };
        // flattened index in this crate's layout (all three families are 2x2)
        let idx = match (notation, var) {
            (_, 'X') => r * 2 + c,
            (Notation::Classic, 'Y') => c * 2 + r,
            (Notation::Classic, 'Z') => r * 2 + c,
            (Notation::Direct, 'Y') => c * 2 + r,
            (Notation::Direct, 'Z') => r * 2 + c,
            _ => unreachable!("variable families are X, Y, Z"),
        };
        v[idx] += coef;
    }
    v
}

fn term(notation: Notation, x: Form, y: Form, z: Form, scale: f64) -> Rank1Term {
    let mut gamma = form_to_vec(z, notation, 'Z');
    for g in &mut gamma {
        *g *= scale;
    }
    Rank1Term::new(form_to_vec(x, notation, 'X'), form_to_vec(y, notation, 'Y'), gamma)
}

fn shape222() -> TensorShape {
    TensorShape { qi: 2, qj: 2, qk: 2 }
}

/// Strassen's seven products for `<2,2,2>`.
pub fn strassen_decomposition() -> Decomposition {
    use Notation::Classic as C;
    let terms = vec![
        term(C, &[(1, 1, 1.0), (2, 2, 1.0)], &[(1, 1, 1.0), (2, 2, 1.0)], &[(1, 1, 1.0), (2, 2, 1.0)], 1.0),
        term(C, &[(2, 1, 1.0), (2, 2, 1.0)], &[(1, 1, 1.0)], &[(2, 1, 1.0), (2, 2, -1.0)], 1.0),
        term(C, &[(1, 1, 1.0)], &[(1, 2, 1.0), (2, 2, -1.0)], &[(1, 2, 1.0), (2, 2, 1.0)], 1.0),
        term(C, &[(2, 2, 1.0)], &[(2, 1, 1.0), (1, 1, -1.0)], &[(1, 1, 1.0), (2, 1, 1.0)], 1.0),
        term(C, &[(1, 1, 1.0), (1, 2, 1.0)], &[(2, 2, 1.0)], &[(1, 1, -1.0), (1, 2, 1.0)], 1.0),
        term(C, &[(2, 1, 1.0), (1, 1, -1.0)], &[(1, 1, 1.0), (1, 2, 1.0)], &[(2, 2, 1.0)], 1.0),
        term(C, &[(1, 2, 1.0), (2, 2, -1.0)], &[(2, 1, 1.0), (2, 2, 1.0)], &[(1, 1, 1.0)], 1.0),
    ];
    Decomposition::new(shape222(), terms).expect("static shape")
}

/// Six-product decomposition of `<2,2,2>` with the `X[0,0] Y[0,0] Z[0,0]`
/// term removed.
pub fn sw_decomposition() -> Decomposition {
    use Notation::Classic as C;
    let terms = vec![
        term(C, &[(2, 1, 1.0), (2, 2, 1.0)], &[(2, 1, 1.0), (2, 2, 1.0)], &[(1, 2, -1.0), (2, 2, 1.0)], 1.0),
        term(C, &[(1, 2, 1.0)], &[(2, 1, 1.0)], &[(1, 1, 1.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)], 1.0),
        term(C, &[(1, 2, 1.0), (2, 2, 1.0)], &[(1, 2, 1.0), (2, 2, -1.0)], &[(2, 1, 1.0), (2, 2, -1.0)], 1.0),
        term(
            C,
            &[(1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0)],
            &[(1, 2, -1.0), (2, 1, 1.0), (2, 2, 1.0)],
            &[(1, 2, 1.0), (2, 1, 1.0), (2, 2, -1.0)],
            1.0,
        ),
        term(C, &[(1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 1.0)], &[(1, 2, 1.0)], &[(1, 2, 1.0)], 1.0),
        term(C, &[(2, 1, 1.0)], &[(1, 1, 1.0), (1, 2, 1.0), (2, 1, -1.0), (2, 2, -1.0)], &[(2, 1, 1.0)], 1.0),
    ];
    Decomposition::new(shape222(), terms).expect("static shape")
}

/// Target of [`sw_decomposition`]: `<2,2,2>` minus `X[0,0] Y[0,0] Z[0,0]`.
pub fn sw_target() -> Tensor {
    let mut t = matmul_tensor(2, 2).expect("static shape");
    t.set(0, 0, 0, 0, 0, 0, 0.0);
    t
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::domain(alloc::format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// True when `eps` is small enough that floating-point cancellation becomes
/// a concern; callers decide whether to warn.
pub fn epsilon_is_ill_conditioned(eps: f64) -> bool {
    eps < CONDITIONING_EPSILON
}

/// The five rank-1 terms of `T2112(eps)`.
pub fn t2112_decomposition(eps: f64) -> Result<Decomposition> {
    check_epsilon(eps)?;
    use Notation::Direct as D;
    let e = eps;
    let (e3, e4, e5) = (e * e * e, e * e * e * e, e * e * e * e * e);
    // (sx, sy, sz) sign patterns of the four product terms, in the order
    // (X10, X01, X11), (Y10, Y01, Y11), (Z10, Z01, Z11).
    let signs: [[[f64; 3]; 3]; 4] = [
        [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]],
        [[1.0, -1.0, -1.0], [-1.0, -1.0, 1.0], [1.0, -1.0, -1.0]],
        [[-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [-1.0, 1.0, -1.0]],
        [[-1.0, 1.0, -1.0], [1.0, -1.0, -1.0], [-1.0, -1.0, 1.0]],
    ];
    let mut terms = Vec::with_capacity(5);
    for [sx, sy, sz] in signs {
        let x = [(0, 0, 1.0), (1, 0, sx[0] / e), (0, 1, sx[1] / e3), (1, 1, sx[2])];
        let y = [(0, 0, 1.0 / e3), (1, 0, sy[0]), (0, 1, sy[1]), (1, 1, sy[2] / e)];
        let z = [(0, 0, e3), (1, 0, sz[0] * e4), (0, 1, sz[1] * e4), (1, 1, sz[2] * e)];
        terms.push(term(D, &x, &y, &z, 0.25));
    }
    terms.push(term(D, &[(0, 1, 1.0)], &[(0, 0, 1.0)], &[(1, 1, -1.0 / e5)], 1.0));
    Decomposition::new(shape222(), terms)
}

/// One printed monomial `coef * X_{xr,xc} Y_{yr,yc} Z_{zr,zc}` (0-indexed,
/// T2112 notation).
type Monomial = ((usize, usize), (usize, usize), (usize, usize), f64);

fn t2112_target_monomials(eps: f64) -> Vec<Monomial> {
    let e = eps;
    let (e3, e4) = (e * e * e, e * e * e * e);
    vec![
        ((0, 0), (0, 0), (0, 0), 1.0),
        ((0, 1), (1, 0), (0, 0), 1.0),
        ((1, 1), (0, 1), (0, 0), e3),
        ((1, 0), (1, 1), (0, 0), e),
        ((0, 0), (0, 1), (0, 1), e4),
        ((0, 1), (1, 1), (0, 1), 1.0),
        ((1, 1), (0, 0), (0, 1), e),
        ((1, 0), (1, 0), (0, 1), e3),
        ((1, 0), (0, 0), (1, 0), 1.0),
        ((1, 1), (1, 0), (1, 0), e4),
        ((0, 1), (0, 1), (1, 0), e),
        ((0, 0), (1, 1), (1, 0), e3),
        ((1, 0), (0, 1), (1, 1), 1.0),
        ((1, 1), (1, 1), (1, 1), 1.0),
        ((0, 0), (1, 0), (1, 1), e),
    ]
}

fn tensor_from_monomials(monos: &[Monomial]) -> Tensor {
    let mut t = Tensor::zeros(shape222()).expect("static shape");
    for &((xr, xc), (yr, yc), (zr, zc), c) in monos {
        // X_{r,c} -> X[i=r,k=c]; Y_{r,c} -> Y[j=c,k=r]; Z_{r,c} -> Z[r,c]
        t.add_at(xr * 2 + xc, yc * 2 + yr, zr * 2 + zc, c);
    }
    t
}

/// The 15-term polynomial that `T2112(eps)` computes.
pub fn t2112_target(eps: f64) -> Result<Tensor> {
    check_epsilon(eps)?;
    Ok(tensor_from_monomials(&t2112_target_monomials(eps)))
}

/// The `eps -> 0` limit of the target: the six unit matmul terms that
/// survive, i.e. `<2,2,2>` without `X[0,0]Y[1,0]Z[0,1]` and
/// `X[1,1]Y[0,1]Z[1,0]`.
pub fn t2112_limit_tensor() -> Tensor {
    let mut t = matmul_tensor(2, 2).expect("static shape");
    t.set(0, 0, 1, 0, 0, 1, 0.0);
    t.set(1, 1, 0, 1, 1, 0, 0.0);
    t
}

/// Outcome of replaying the derivation of `T2112` from the group tensor of
/// `(Z/2)^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationCheck {
    pub group_terms: usize,
    pub final_terms: usize,
    pub max_rel_err: f64,
    pub matches: bool,
}

/// Builds `sum_{a,b} X_a Y_b Z_{a+b}` over `(Z/2)^2`, swaps `X01 <-> X11`
/// and `Y10 <-> Y11`, applies the epsilon scalings, drops the `eps^-5`
/// monomial and compares with [`t2112_target`].
pub fn t2112_derivation(eps: f64) -> Result<DerivationCheck> {
    check_epsilon(eps)?;
    let e = eps;
    let label = |v: usize| (v >> 1, v & 1);
    let mut monos: Vec<Monomial> = Vec::new();
    for a in 0..4usize {
        for b in 0..4usize {
            monos.push((label(a), label(b), label(a ^ b), 1.0));
        }
    }
    let group_terms = monos.len();

    let swap = |p: (usize, usize), u: (usize, usize), v: (usize, usize)| {
        if p == u {
            v
        } else if p == v {
            u
        } else {
            p
        }
    };
    let x_scale = |p: (usize, usize)| match p {
        (1, 0) => 1.0 / e,
        (0, 1) => 1.0 / (e * e * e),
        _ => 1.0,
    };
    let y_scale = |p: (usize, usize)| match p {
        (1, 1) => 1.0 / e,
        (0, 0) => 1.0 / (e * e * e),
        _ => 1.0,
    };
    let z_scale = |p: (usize, usize)| match p {
        (0, 0) => e * e * e,
        (0, 1) | (1, 0) => e * e * e * e,
        _ => e,
    };
    let mut out = Vec::new();
    for (x, y, z, c) in monos {
        let x = swap(x, (0, 1), (1, 1));
        let y = swap(y, (1, 0), (1, 1));
        let coef = c * x_scale(x) * y_scale(y) * z_scale(z);
        if x == (0, 1) && y == (0, 0) && z == (1, 1) {
            // the eps^-5 X01 Y00 Z11 monomial is the one that gets deleted
            continue;
        }
        out.push((x, y, z, coef));
    }
    let final_terms = out.len();
    let derived = tensor_from_monomials(&out);
    let max_rel_err = derived.relative_diff(&t2112_target(eps)?)?;
    Ok(DerivationCheck { group_terms, final_terms, max_rel_err, matches: max_rel_err <= 1e-12 })
}

/// Runs the derivation at the two reference epsilons.
pub fn t2112_derivation_check() -> bool {
    [0.5, 0.1].iter().all(|&e| t2112_derivation(e).map(|c| c.matches).unwrap_or(false))
}

#[derive(Clone, Debug)]
pub struct ZooEntry {
    pub name: &'static str,
    pub decomposition: Decomposition,
    pub target: Tensor,
    pub declared_rank: usize,
    /// Reference efficacy (the `eps -> 0` limit for T2112).
    pub declared_eff: f64,
}

impl ZooEntry {
    pub fn eff(&self) -> f64 {
        eff_table(&self.target).total
    }

    pub fn exponent(&self) -> Result<f64> {
        exponent_bound(self.declared_rank, self.eff())
    }

    pub fn shape(&self) -> TensorShape {
        self.decomposition.shape()
    }
}

pub const ZOO_NAMES: [&str; 3] = ["strassen", "sw", "t2112"];

pub fn zoo_entry(name: &str, eps: f64) -> Result<ZooEntry> {
    match name {
        "strassen" => Ok(ZooEntry {
            name: "strassen",
            decomposition: strassen_decomposition(),
            target: matmul_tensor(2, 2)?,
            declared_rank: 7,
            declared_eff: libm::sqrt(8.0),
        }),
        "sw" => Ok(ZooEntry {
            name: "sw",
            decomposition: sw_decomposition(),
            target: sw_target(),
            declared_rank: 6,
            declared_eff: libm::sqrt(7.0),
        }),
        "t2112" => Ok(ZooEntry {
            name: "t2112",
            decomposition: t2112_decomposition(eps)?,
            target: t2112_target(eps)?,
            declared_rank: 5,
            declared_eff: libm::sqrt(6.0),
        }),
        other => Err(Error::domain(alloc::format!(
            "unknown tensor {other:?}; expected one of {}",
            ZOO_NAMES.join(", ")
        ))),
    }
}

pub fn zoo_entries(eps: f64) -> Result<Vec<ZooEntry>> {
    ZOO_NAMES.iter().map(|n| zoo_entry(n, eps)).collect()
}

/// Human-readable description used by listings.
pub fn describe(entry: &ZooEntry) -> String {
    alloc::format!("{} {} rank {}", entry.name, entry.shape(), entry.declared_rank)
}
