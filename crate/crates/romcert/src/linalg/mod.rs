//! Minimal sparse/banded/dense linear algebra kernels shared across the crate.
//!
//! Dense decompositions delegate to nalgebra; the sparse CSR type and the
//! pivoted banded LU are local because every large operator in this crate is
//! narrowly banded (possibly after a symmetric interleaving permutation) and
//! a general sparse-direct dependency would be dead weight.

mod banded;
mod csr;
mod dense;

pub use banded::BandedLu;
pub use csr::{Csr, Dia};
pub use dense::{
    dominant_eigenvalue_spd, mgs_orthonormalize, numerical_rank, orthonormality_defect,
    rank_for_energy_tol, svd_sorted, PowerIterOpts,
};
