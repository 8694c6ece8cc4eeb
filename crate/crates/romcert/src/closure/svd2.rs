//! Two-stage SVD compression of defect tensors.
//!
//! A defect tensor stacks one defect matrix D(p_i) per sampled parameter.
//! Stage 1 compresses each slice in time: the SVD of D(p_i) is truncated at
//! a relative Frobenius tolerance and the kept left singular vectors are
//! collected. Stage 2 concatenates those orthonormal blocks into R and
//! truncates the SVD of R, producing a single spatial basis V_d that covers
//! the defect dynamics across all sampled parameters. Reduced coefficients
//! are then the mode-1 contractions V_d^T D(p_i).

use crate::error::{Error, Result};
use crate::linalg::{rank_for_energy_tol, svd_sorted};
use crate::models::TimeGrid;
use crate::timestepping::ImexScheme;
use nalgebra::DMatrix;

/// Defect matrices of one system sampled over a parameter set, all on the
/// same grid and scheme. Every slice has one column per grid point; column 0
/// is zero by construction.
#[derive(Debug, Clone)]
pub struct DefectTensor {
    pub slices: Vec<DMatrix<f64>>,
    pub params: Vec<Vec<f64>>,
    pub grid: TimeGrid,
    pub scheme: ImexScheme,
}

impl DefectTensor {
    pub fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(Error::InvalidArgument("defect tensor has no slices".into()));
        }
        if self.slices.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "defect tensor parameter list".into(),
                expected: self.slices.len(),
                got: self.params.len(),
            });
        }
        let n = self.slices[0].nrows();
        for (i, s) in self.slices.iter().enumerate() {
            if s.nrows() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("defect slice {i} rows"),
                    expected: n,
                    got: s.nrows(),
                });
            }
            if s.ncols() != self.grid.n_points() {
                return Err(Error::GridMismatch(format!(
                    "defect slice {i} has {} columns for a grid of {} points",
                    s.ncols(),
                    self.grid.n_points()
                )));
            }
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.slices.len()
    }

    pub fn state_dim(&self) -> usize {
        self.slices.first().map_or(0, |s| s.nrows())
    }
}

/// Output of [`two_stage_svd`]: the spatial basis, the reduced coefficients
/// per sample, and the spectra of both stages for reporting.
#[derive(Debug, Clone)]
pub struct TwoStageSvd {
    /// Column-orthonormal spatial defect basis, one column per kept mode.
    pub v_d: DMatrix<f64>,
    /// V_d^T D(p_i) for every sample, n_d rows by N_t columns each.
    pub reduced: Vec<DMatrix<f64>>,
    /// Stage-1 rank kept for each slice.
    pub slice_ranks: Vec<usize>,
    /// Full stage-1 spectrum of each slice.
    pub slice_singular_values: Vec<Vec<f64>>,
    /// Spectrum of the stacked block matrix R.
    pub stacked_singular_values: Vec<f64>,
}

impl TwoStageSvd {
    pub fn n_modes(&self) -> usize {
        self.v_d.ncols()
    }
}

/// Compress `tensor` with per-slice SVDs truncated at `tol_t` followed by an
/// SVD of the stacked left bases truncated at `tol_p`. Both tolerances are
/// relative discarded-energy thresholds in (0, 1): rank r keeps
/// sqrt(sum_{i>r} s_i^2) <= tol * sqrt(sum_i s_i^2).
pub fn two_stage_svd(tensor: &DefectTensor, tol_t: f64, tol_p: f64) -> Result<TwoStageSvd> {
    tensor.validate()?;
    for (name, tol) in [("tol_t", tol_t), ("tol_p", tol_p)] {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "{name} must lie in (0, 1), got {tol}"
            )));
        }
    }

    let n = tensor.state_dim();
    let mut slice_ranks = Vec::with_capacity(tensor.n_samples());
    let mut slice_singular_values = Vec::with_capacity(tensor.n_samples());
    let mut kept_blocks: Vec<DMatrix<f64>> = Vec::with_capacity(tensor.n_samples());
    for slice in &tensor.slices {
        let (u, s, _) = svd_sorted(slice)?;
        let rank = rank_for_energy_tol(&s, tol_t);
        if rank > 0 {
            kept_blocks.push(u.columns(0, rank).into_owned());
        }
        slice_ranks.push(rank);
        slice_singular_values.push(s);
    }

    let total_cols: usize = slice_ranks.iter().sum();
    if total_cols == 0 {
        return Err(Error::InvalidArgument(
            "defect tensor is identically zero; nothing to compress".into(),
        ));
    }
    let mut stacked = DMatrix::zeros(n, total_cols);
    let mut offset = 0;
    for block in &kept_blocks {
        stacked.columns_mut(offset, block.ncols()).copy_from(block);
        offset += block.ncols();
    }

    let (u, s, _) = svd_sorted(&stacked)?;
    let n_d = rank_for_energy_tol(&s, tol_p);
    let v_d = u.columns(0, n_d).into_owned();

    let v_d_t = v_d.transpose();
    let reduced = tensor.slices.iter().map(|d| &v_d_t * d).collect();

    Ok(TwoStageSvd {
        v_d,
        reduced,
        slice_ranks,
        slice_singular_values,
        stacked_singular_values: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn default_grid(n_points: usize) -> TimeGrid {
        TimeGrid::new(0.0, 0.1, n_points - 1).unwrap()
    }

    /// Smooth synthetic tensor: a handful of spatial profiles with
    /// parameter- and time-dependent amplitudes, plus small noise.
    fn synthetic_tensor(n: usize, n_t: usize, d_s: usize, noise: f64) -> DefectTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut slices = Vec::new();
        let mut params = Vec::new();
        for s in 0..d_s {
            let p = 0.2 + 0.6 * s as f64 / (d_s.max(2) - 1) as f64;
            let mut m = DMatrix::zeros(n, n_t);
            for k in 1..n_t {
                let t = k as f64 * 0.1;
                for i in 0..n {
                    let z = (i + 1) as f64 / (n + 1) as f64;
                    let modes = (std::f64::consts::PI * z).sin() * (-p * t).exp()
                        + 0.3 * (2.0 * std::f64::consts::PI * z).sin() * (-2.0 * p * t).exp()
                        + 0.05 * (3.0 * std::f64::consts::PI * z).cos() * p * t.cos();
                    m[(i, k)] = modes + noise * rng.gen_range(-1.0..1.0);
                }
            }
            slices.push(m);
            params.push(vec![p]);
        }
        DefectTensor {
            slices,
            params,
            grid: default_grid(n_t),
            scheme: ImexScheme::Order1,
        }
    }

    #[test]
    fn rank_one_tensor_collapses_to_a_single_mode() {
        let n = 20;
        let n_t = 11;
        let profile: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * 0.3).sin()).collect();
        let mut slices = Vec::new();
        let mut params = Vec::new();
        for s in 0..4 {
            let amp = 1.0 + s as f64;
            let mut m = DMatrix::zeros(n, n_t);
            for k in 1..n_t {
                for i in 0..n {
                    m[(i, k)] = amp * profile[i] * (k as f64 * 0.2).cos();
                }
            }
            slices.push(m);
            params.push(vec![s as f64]);
        }
        let tensor = DefectTensor {
            slices,
            params,
            grid: default_grid(n_t),
            scheme: ImexScheme::Order1,
        };
        for tol in [0.5, 1e-2, 1e-6] {
            let out = two_stage_svd(&tensor, tol, tol).unwrap();
            assert_eq!(out.n_modes(), 1, "rank-1 data must give one mode at tol {tol}");
        }
    }

    #[test]
    fn basis_is_orthonormal_and_reduced_slices_are_projections() {
        let tensor = synthetic_tensor(30, 12, 5, 1e-8);
        let out = two_stage_svd(&tensor, 1e-6, 1e-6).unwrap();
        assert!(orthonormality_defect(&out.v_d) <= 1e-12);
        for (slice, red) in tensor.slices.iter().zip(&out.reduced) {
            let direct = out.v_d.transpose() * slice;
            assert!((&direct - red).norm() <= 1e-13 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn projection_error_is_bracketed_by_the_spectra() {
        // Upper bound per slice from the discarded stage energies; lower
        // bound from the optimal subspace given by a full SVD of the
        // mode-1 unfolding.
        let tensor = synthetic_tensor(36, 14, 6, 1e-6);
        let (tol_t, tol_p) = (1e-3, 1e-3);
        let out = two_stage_svd(&tensor, tol_t, tol_p).unwrap();
        let p = &out.v_d * out.v_d.transpose();

        let stage2_tail: f64 = out.stacked_singular_values[out.n_modes()..]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();

        let mut total_sq = 0.0;
        for (i, slice) in tensor.slices.iter().enumerate() {
            let err = (slice - &p * slice).norm();
            total_sq += err * err;
            let s = &out.slice_singular_values[i];
            let stage1_tail: f64 = s[out.slice_ranks[i]..].iter().map(|v| v * v).sum::<f64>().sqrt();
            let bound = s[0] * stage2_tail + stage1_tail;
            assert!(
                err <= bound * (1.0 + 1e-10) + 1e-14,
                "slice {i}: projection error {err} exceeds spectral bound {bound}"
            );
        }

        let n = tensor.state_dim();
        let n_t = tensor.grid.n_points();
        let mut unfolding = DMatrix::zeros(n, n_t * tensor.n_samples());
        for (i, slice) in tensor.slices.iter().enumerate() {
            unfolding.columns_mut(i * n_t, n_t).copy_from(slice);
        }
        let (_, tau, _) = svd_sorted(&unfolding).unwrap();
        let optimal_tail: f64 = tau[out.n_modes().min(tau.len())..]
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt();
        let total = total_sq.sqrt();
        assert!(
            total >= optimal_tail * (1.0 - 1e-10) - 1e-14,
            "two-stage error {total} beats the optimal rank bound {optimal_tail}"
        );
    }

    #[test]
    fn mode_count_is_monotone_in_both_tolerances() {
        let tensor = synthetic_tensor(24, 10, 5, 1e-5);
        let ladder = [1e-1, 1e-2, 1e-4, 1e-8];
        let mut prev = 0usize;
        for tol in ladder {
            let n_d = two_stage_svd(&tensor, tol, 1e-3).unwrap().n_modes();
            assert!(n_d >= prev, "tightening tol_t must not shrink the basis");
            prev = n_d;
        }
        let mut prev = 0usize;
        for tol in ladder {
            let n_d = two_stage_svd(&tensor, 1e-3, tol).unwrap().n_modes();
            assert!(n_d >= prev, "tightening tol_p must not shrink the basis");
            prev = n_d;
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let empty = DefectTensor {
            slices: vec![],
            params: vec![],
            grid: default_grid(5),
            scheme: ImexScheme::Order1,
        };
        assert!(two_stage_svd(&empty, 1e-3, 1e-3).is_err());

        let zero = DefectTensor {
            slices: vec![DMatrix::zeros(8, 5); 2],
            params: vec![vec![0.1], vec![0.2]],
            grid: default_grid(5),
            scheme: ImexScheme::Order1,
        };
        assert!(two_stage_svd(&zero, 1e-3, 1e-3).is_err());

        let tensor = synthetic_tensor(10, 6, 3, 0.0);
        assert!(two_stage_svd(&tensor, 0.0, 1e-3).is_err());
        assert!(two_stage_svd(&tensor, 1e-3, 1.0).is_err());
    }
}
