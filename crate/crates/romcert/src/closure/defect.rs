//! Extraction of per-step defect vectors from reference trajectories.
//!
//! Inserting snapshots x^k produced by one solver (typically an adaptive
//! reference integrator) into the update formula of an imposed IMEX scheme
//! leaves a mismatch at every step,
//!
//!     d^k := E(k) x^k - [G(k) x^{k-1} + dt (w1 f^{k-1} + w2 f^{k-2}) + dt B u^k],
//!
//! the scheme's local truncation error along the snapshots. Adding d^k back
//! to the right-hand side of step k turns the IMEX march into a corrected
//! march that reproduces the snapshots, and d^k equals the negative residual
//! of the imposed scheme evaluated at the snapshots.

use crate::error::{Error, Result};
use crate::models::{OdeSystem, Trajectory};
use crate::timestepping::{ClosureSource, ImexOps, ImexScheme};
use nalgebra::DMatrix;

/// Defect matrix of `traj` under the scheme frozen in `ops`. The result has
/// one column per grid point: column 0 is zero (no step precedes t0) and
/// column k holds d^k for k = 1..=steps.
pub fn defect_with_ops(ops: &ImexOps, traj: &Trajectory) -> Result<DMatrix<f64>> {
    traj.validate()?;
    let n = ops.dim();
    if traj.states.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "defect trajectory states".into(),
            expected: n,
            got: traj.states.nrows(),
        });
    }
    if traj.grid != ops.grid {
        return Err(Error::GridMismatch(format!(
            "trajectory grid {:?} differs from the operator grid {:?}",
            traj.grid, ops.grid
        )));
    }

    let steps = ops.grid.steps;
    let linear = ops.frozen.sys.is_linear();
    let mut defects = DMatrix::zeros(n, steps + 1);

    let mut x_prev = traj.column(0);
    let mut x_cur = vec![0.0; n];
    let mut f_prev = vec![0.0; n];
    let mut f_prev2 = vec![0.0; n];
    if !linear {
        ops.eval_f(&x_prev, &mut f_prev);
    }
    let mut rhs = vec![0.0; n];
    let mut ex = vec![0.0; n];
    let mut u_buf = vec![0.0; ops.frozen.sys.n_inputs()];

    for k in 1..=steps {
        for i in 0..n {
            x_cur[i] = traj.states[(i, k)];
        }
        let (fp, fp2) = if linear {
            (None, None)
        } else {
            (Some(f_prev.as_slice()), Some(f_prev2.as_slice()))
        };
        ops.explicit_side(k, &x_prev, fp, fp2, &mut u_buf, &mut rhs);
        ops.apply_e(k, &x_cur, &mut ex);
        for i in 0..n {
            defects[(i, k)] = ex[i] - rhs[i];
        }
        std::mem::swap(&mut f_prev2, &mut f_prev);
        if !linear {
            ops.eval_f(&x_cur, &mut f_prev);
        }
        std::mem::swap(&mut x_prev, &mut x_cur);
    }

    Ok(defects)
}

/// One-call defect extraction: freeze the scheme operators for (`sys`, `p`)
/// on the trajectory's grid and evaluate the defect of every step.
pub fn compute_defect_trajectory(
    sys: &dyn OdeSystem,
    p: &[f64],
    traj: &Trajectory,
    scheme: ImexScheme,
) -> Result<DMatrix<f64>> {
    let ops = ImexOps::new(sys, p, traj.grid, scheme)?;
    defect_with_ops(&ops, traj)
}

/// Wraps a full defect matrix (one column per grid point, column 0 zero) as
/// a per-step correction source: step k reads column k.
pub struct DefectMatrixSource<'a>(pub &'a DMatrix<f64>);

impl ClosureSource for DefectMatrixSource<'_> {
    fn correction(&self, k: usize, out: &mut [f64]) -> Result<()> {
        if k == 0 || k >= self.0.ncols() {
            return Err(Error::InvalidArgument(format!(
                "correction requested for step {k}, defect columns cover 1..={}",
                self.0.ncols().saturating_sub(1)
            )));
        }
        if out.len() != self.0.nrows() {
            return Err(Error::DimensionMismatch {
                context: "defect correction".into(),
                expected: self.0.nrows(),
                got: out.len(),
            });
        }
        for (o, v) in out.iter_mut().zip(self.0.column(k).iter()) {
            *o = *v;
        }
        Ok(())
    }
}
