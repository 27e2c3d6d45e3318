//! Third-order tensor algebra under the t-product, the tensor SVD, tubal-sparse
//! coding and the K-TSVD dictionary learner.
//!
//! Everything in this crate is pure computation over in-memory tensors and only
//! needs `alloc`. File formats, the command-line front end and parallel patch
//! pipelines live in the `tdict` crate.
//!
//! Tensors are stored frontal-slice-major, column-major within each frontal
//! slice: entry `(i, j, k)` (0-based) sits at `(k * n2 + j) * n1 + i`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

mod error;
pub mod ktsvd;
pub(crate) mod linalg;
pub mod patches;
pub mod rng;
pub mod sparse;
pub mod synth;
pub mod tcore;
pub mod tsvd;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use tcore::{FTensor3, Tensor3, Tube};
