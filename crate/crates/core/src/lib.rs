//! Light bulb problem solvers built on low-rank tensors.
//!
//! The crate is `no_std` with `alloc`. It covers tensor arithmetic and
//! recursive application of rank decompositions, the efficacy calculus that
//! bounds what a tensor can detect, instance generation, the aggregation
//! step that expands short vectors, and the detection pipeline itself.
//!
//! Index conventions used throughout: a tensor over `X`, `Y`, `Z` variables
//! has coefficients `T(X[i,k] Y[j,k'] Z[i',j'])`, and matrix multiplication
//! is the tensor `sum X[i,k] Y[j,k] Z[i,j]`. Kronecker products pair indices
//! row-major, so `(i, i')` becomes `i * q' + i'`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod aggregation;
pub mod design;
pub mod efficacy;
pub mod error;
pub mod exact;
pub mod hashing;
pub mod instances;
pub mod linalg;
pub mod matrix;
pub mod rng;
pub mod solver;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use matrix::{Matrix, Scalar};
pub use tensor::{Decomposition, Rank1Term, Tensor, TensorShape};
