//! Discrete empirical interpolation for nonlinear terms.
//!
//! A POD basis U of nonlinearity snapshots is paired with greedily chosen
//! interpolation rows so that f is approximated by I[f] = U (P'U)^-1 P'f,
//! where P gathers the chosen rows. Reduced marches then evaluate f at the
//! interpolation rows only; estimation can additionally measure the exact
//! interpolation error at desk scale.

use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, svd_sorted};
use nalgebra::{DMatrix, Dyn, LU};

/// Interpolation operator built from nonlinearity snapshots.
pub struct DeimProjector {
    /// POD basis of the snapshots, N x r.
    pub u: DMatrix<f64>,
    /// Greedily selected interpolation rows, one per basis column.
    pub indices: Vec<usize>,
    /// Singular values of the snapshot matrix (full spectrum, descending).
    pub singular_values: Vec<f64>,
    ptu_lu: LU<f64, Dyn, Dyn>,
}

impl DeimProjector {
    /// POD of the snapshot columns truncated to at most `r_c` modes (capped
    /// at the numerical rank), followed by the standard greedy row
    /// selection: each new row maximizes the residual of interpolating the
    /// next basis column with the rows chosen so far.
    pub fn build(f_snapshots: &DMatrix<f64>, r_c: usize) -> Result<Self> {
        if r_c == 0 {
            return Err(Error::InvalidArgument(
                "interpolation needs at least one mode".into(),
            ));
        }
        if f_snapshots.ncols() == 0 || f_snapshots.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "empty nonlinearity snapshot matrix".into(),
            ));
        }
        let (u_all, s, _) = svd_sorted(f_snapshots)?;
        // Keep numerically meaningful modes only; beyond the 1e-13 rank the
        // columns are roundoff noise and P'U turns singular.
        let rank = numerical_rank(&s, 1e-13);
        if rank == 0 {
            return Err(Error::InvalidArgument(
                "nonlinearity snapshots are identically zero".into(),
            ));
        }
        let r = r_c.min(rank);
        let u = DMatrix::from(u_all.columns(0, r));

        let n = u.nrows();
        let mut indices = Vec::with_capacity(r);
        let argmax_abs = |v: &[f64]| -> usize {
            let mut best = 0;
            let mut best_val = v[0].abs();
            for (i, x) in v.iter().enumerate().skip(1) {
                if x.abs() > best_val {
                    best_val = x.abs();
                    best = i;
                }
            }
            best
        };
        let col0: Vec<f64> = u.column(0).iter().copied().collect();
        indices.push(argmax_abs(&col0));
        for j in 1..r {
            // Interpolate column j with the current rows, take the residual.
            let uj = u.column(j);
            let mut small = DMatrix::zeros(j, j);
            let mut rhs = DMatrix::zeros(j, 1);
            for (row, &idx) in indices.iter().enumerate() {
                for col in 0..j {
                    small[(row, col)] = u[(idx, col)];
                }
                rhs[(row, 0)] = uj[idx];
            }
            let c = small.lu().solve(&rhs).ok_or_else(|| {
                Error::SingularMatrix(format!(
                    "interpolation system became singular at mode {j}"
                ))
            })?;
            let mut resid: Vec<f64> = uj.iter().copied().collect();
            for col in 0..j {
                let cc = c[(col, 0)];
                for (ri, ucol) in resid.iter_mut().zip(u.column(col).iter()) {
                    *ri -= cc * ucol;
                }
            }
            let pick = argmax_abs(&resid);
            if indices.contains(&pick) {
                return Err(Error::SingularMatrix(format!(
                    "row {pick} selected twice; snapshots do not support {r} modes"
                )));
            }
            indices.push(pick);
        }
        debug_assert!(indices.iter().all(|&i| i < n));

        let mut ptu = DMatrix::zeros(r, r);
        for (row, &idx) in indices.iter().enumerate() {
            for col in 0..r {
                ptu[(row, col)] = u[(idx, col)];
            }
        }
        let ptu_lu = ptu.lu();
        if !ptu_lu.is_invertible() {
            return Err(Error::SingularMatrix(
                "gathered interpolation matrix P'U is singular".into(),
            ));
        }
        Ok(Self {
            u,
            indices,
            singular_values: s,
            ptu_lu,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.indices.len()
    }

    /// c = (P'U)^-1 f_P from the nonlinearity values at the chosen rows.
    pub fn coefficients(&self, f_at_rows: &[f64]) -> Result<DMatrix<f64>> {
        if f_at_rows.len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                context: "gathered nonlinearity values".into(),
                expected: self.n_modes(),
                got: f_at_rows.len(),
            });
        }
        let rhs = DMatrix::from_column_slice(self.n_modes(), 1, f_at_rows);
        self.ptu_lu.solve(&rhs).ok_or_else(|| {
            Error::SingularMatrix("interpolation solve failed".into())
        })
    }

    /// I[f] for a full-length vector: gather at the rows, then lift.
    pub fn interpolate_full(&self, f_full: &[f64], out: &mut [f64]) -> Result<()> {
        if f_full.len() != self.u.nrows() || out.len() != self.u.nrows() {
            return Err(Error::DimensionMismatch {
                context: "interpolation input".into(),
                expected: self.u.nrows(),
                got: f_full.len().min(out.len()),
            });
        }
        let gathered: Vec<f64> = self.indices.iter().map(|&i| f_full[i]).collect();
        let c = self.coefficients(&gathered)?;
        out.fill(0.0);
        for col in 0..self.n_modes() {
            let cc = c[(col, 0)];
            for (o, ucol) in out.iter_mut().zip(self.u.column(col).iter()) {
                *o += cc * ucol;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_snapshots(n: usize, cols: usize) -> DMatrix<f64> {
        // The Gaussian term keeps the numerical rank high; pure trig sums
        // separate into a handful of products and cap the rank too early.
        DMatrix::from_fn(n, cols, |i, j| {
            let z = i as f64 / (n - 1) as f64;
            let t = j as f64 / cols as f64;
            (3.0 * z + t).sin()
                + 0.5 * (7.0 * z - 2.0 * t).cos()
                + 0.7 * (-8.0 * (z - t) * (z - t)).exp()
        })
    }

    #[test]
    fn selection_matches_a_dense_oracle() {
        let snaps = smooth_snapshots(60, 25);
        let deim = DeimProjector::build(&snaps, 6).unwrap();
        assert_eq!(deim.n_modes(), 6);

        // Oracle: the textbook selection recomputed with dense pseudo-solves.
        let (u_all, _, _) = svd_sorted(&snaps).unwrap();
        let u = DMatrix::from(u_all.columns(0, 6));
        let mut oracle = vec![u.column(0).iamax()];
        for j in 1..6 {
            let rows: Vec<usize> = oracle.clone();
            let sub = DMatrix::from_fn(j, j, |r, c| u[(rows[r], c)]);
            let rhs = DMatrix::from_fn(j, 1, |r, _| u[(rows[r], j)]);
            let c = sub.lu().solve(&rhs).unwrap();
            let mut resid: Vec<f64> = u.column(j).iter().copied().collect();
            for col in 0..j {
                for (ri, uc) in resid.iter_mut().zip(u.column(col).iter()) {
                    *ri -= c[(col, 0)] * uc;
                }
            }
            let mut best = 0;
            for (i, v) in resid.iter().enumerate() {
                if v.abs() > resid[best].abs() {
                    best = i;
                }
            }
            oracle.push(best);
        }
        assert_eq!(deim.indices, oracle);
    }

    #[test]
    fn vectors_in_the_span_are_reproduced() {
        let snaps = smooth_snapshots(80, 30);
        let deim = DeimProjector::build(&snaps, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = vec![0.0; 80];
        for col in 0..deim.n_modes() {
            let w: f64 = rng.gen_range(-1.0..1.0);
            for (fi, uc) in f.iter_mut().zip(deim.u.column(col).iter()) {
                *fi += w * uc;
            }
        }
        let mut lifted = vec![0.0; 80];
        deim.interpolate_full(&f, &mut lifted).unwrap();
        let err: f64 = f
            .iter()
            .zip(&lifted)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10, "span vector not reproduced, error {err}");
    }

    #[test]
    fn interpolation_is_exact_at_the_chosen_rows() {
        let snaps = smooth_snapshots(50, 20);
        let deim = DeimProjector::build(&snaps, 5).unwrap();
        let f: Vec<f64> = (0..50).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let mut lifted = vec![0.0; 50];
        deim.interpolate_full(&f, &mut lifted).unwrap();
        for &idx in &deim.indices {
            assert!(
                (lifted[idx] - f[idx]).abs() <= 1e-10,
                "interpolation must match at its own rows"
            );
        }
    }

    #[test]
    fn mode_count_is_capped_at_the_snapshot_rank() {
        // Rank-2 snapshots cannot support 5 modes.
        let a = DMatrix::from_fn(40, 2, |i, j| {
            let z = i as f64 / 39.0;
            if j == 0 {
                1.0 + z
            } else {
                (4.0 * z).sin()
            }
        });
        let snaps = &a * DMatrix::from_fn(2, 12, |i, j| ((1 + i + j) as f64 * 0.37).cos());
        let deim = DeimProjector::build(&snaps, 5).unwrap();
        assert_eq!(deim.n_modes(), 2);
        assert_eq!(
            deim.indices.len(),
            deim.indices
                .iter()
                .collect::<std::collections::BTreeSet<_>>()
                .len()
        );
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let zero = DMatrix::<f64>::zeros(10, 4);
        assert!(DeimProjector::build(&zero, 2).is_err());
        let ok = smooth_snapshots(10, 4);
        assert!(DeimProjector::build(&ok, 0).is_err());
    }
}
