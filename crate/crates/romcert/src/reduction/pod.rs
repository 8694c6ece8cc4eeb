//! Incremental proper orthogonal decomposition of snapshot batches.
//!
//! A `ReducedBasis` grows by deflating each new snapshot block against the
//! current span, taking the leading left singular vectors of the remainder,
//! and re-orthonormalizing by modified Gram-Schmidt with one re-pass. The
//! orthonormality defect max |V'V - I| stays below 1e-12 after every update;
//! requests beyond the numerical rank of the deflated block are capped and
//! the shortfall is reported back to the caller.

use crate::error::{Error, Result};
use crate::linalg::{mgs_orthonormalize, orthonormality_defect, svd_sorted};
use nalgebra::DMatrix;

/// What one enrichment did: how many directions were asked for, how many
/// carried signal, and how much of the block survived deflation.
#[derive(Debug, Clone, Copy)]
pub struct BasisUpdate {
    pub requested: usize,
    pub appended: usize,
    /// Frobenius norm of the deflated block relative to the incoming block.
    pub deflated_fraction: f64,
}

impl BasisUpdate {
    /// True when fewer directions were appended than requested.
    pub fn capped(&self) -> bool {
        self.appended < self.requested
    }
}

/// Column-orthonormal basis with its enrichment log.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    v: DMatrix<f64>,
    state_dim: usize,
    history: Vec<BasisUpdate>,
}

impl ReducedBasis {
    /// Basis with no columns over a state space of `state_dim` entries.
    pub fn empty(state_dim: usize) -> Self {
        Self {
            v: DMatrix::zeros(state_dim, 0),
            state_dim,
            history: Vec::new(),
        }
    }

    /// Wraps an existing column-orthonormal matrix.
    pub fn from_columns(v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() == 0 {
            return Err(Error::InvalidArgument("basis over an empty state".into()));
        }
        let defect = orthonormality_defect(&v);
        if v.ncols() > 0 && defect > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal: max Gram deviation {defect:.3e}"
            )));
        }
        let state_dim = v.nrows();
        Ok(Self {
            v,
            state_dim,
            history: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.v
    }

    pub fn history(&self) -> &[BasisUpdate] {
        &self.history
    }

    /// Enriches the basis with up to `r_c` directions from `snapshots`.
    ///
    /// The block is first deflated, X_bar = X - V(V'X), then the leading
    /// left singular vectors of X_bar are appended. Directions whose
    /// singular value falls below 1e-12 of the incoming block norm carry no
    /// signal and are not added, so the append count may be smaller than
    /// `r_c`; an entirely in-span block appends nothing.
    pub fn pod_update(&mut self, snapshots: &DMatrix<f64>, r_c: usize) -> Result<BasisUpdate> {
        if snapshots.nrows() != self.state_dim {
            return Err(Error::DimensionMismatch {
                context: "snapshot rows".into(),
                expected: self.state_dim,
                got: snapshots.nrows(),
            });
        }
        if r_c == 0 {
            return Err(Error::InvalidArgument(
                "enrichment needs at least one requested direction".into(),
            ));
        }
        let scale = snapshots.norm();
        let deflated = if self.v.ncols() == 0 {
            snapshots.clone()
        } else {
            snapshots - &self.v * self.v.tr_mul(snapshots)
        };
        let deflated_fraction = if scale == 0.0 {
            0.0
        } else {
            deflated.norm() / scale
        };

        // Deflation is an orthogonal projection, so every singular value of
        // the remainder is bounded by the block norm; one threshold serves.
        let threshold = 1e-12 * scale;
        let mut appended = 0;
        if deflated.norm() > threshold {
            let (u, s, _) = svd_sorted(&deflated)?;
            let rank = s.iter().filter(|&&sv| sv > threshold).count();
            let take = r_c.min(rank);
            if take > 0 {
                let old = self.v.ncols();
                let mut candidate = DMatrix::zeros(self.state_dim, old + take);
                candidate.columns_mut(0, old).copy_from(&self.v);
                candidate
                    .columns_mut(old, take)
                    .copy_from(&u.columns(0, take));
                let next = mgs_orthonormalize(&candidate, old, 1e-10);
                appended = next.ncols() - old;
                self.v = next;
            }
        }

        let defect = orthonormality_defect(&self.v);
        if defect > 1e-12 {
            return Err(Error::SingularMatrix(format!(
                "basis lost orthonormality during enrichment: deviation {defect:.3e}"
            )));
        }
        let update = BasisUpdate {
            requested: r_c,
            appended,
            deflated_fraction,
        };
        self.history.push(update);
        Ok(update)
    }
}
