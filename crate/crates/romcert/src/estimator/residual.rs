//! Residuals of the closure-corrected scheme.
//!
//! All residuals share one assembly: the explicit side of step k built from
//! designated history states, plus the closure column, minus the implicit
//! operator applied to a designated head state,
//!
//!     r^k = G(k) h^{k-1} + dt (w1 f(h^{k-1}) + w2 f(h^{k-2})) + dt B u^k
//!           + d^k - E(k) g^k.
//!
//! With history = head = lifted reduced states this is the corrected ROM
//! residual; with history = full-order snapshots and head = lifted states it
//! is the auxiliary residual, which by construction equals E(k)(x^k - g^k)
//! whenever the closure column is the exact defect of those snapshots.

use crate::error::{Error, Result};
use crate::reduction::DeimProjector;
use crate::timestepping::ImexOps;
use nalgebra::DMatrix;

fn check_states(ops: &ImexOps, m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != ops.dim() {
        return Err(Error::DimensionMismatch {
            context: format!("{what} rows"),
            expected: ops.dim(),
            got: m.nrows(),
        });
    }
    if m.ncols() != ops.grid.n_points() {
        return Err(Error::GridMismatch(format!(
            "{what} has {} columns for a grid of {} points",
            m.ncols(),
            ops.grid.n_points()
        )));
    }
    Ok(())
}

/// Core assembly shared by the corrected and auxiliary residuals. Column 0
/// is zero; column k holds r^k as defined above. `defect` may be omitted
/// for the closure-free (naive) residual.
pub fn scheme_residual(
    ops: &ImexOps,
    history: &DMatrix<f64>,
    head: &DMatrix<f64>,
    defect: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    check_states(ops, history, "history states")?;
    check_states(ops, head, "head states")?;
    if let Some(d) = defect {
        check_states(ops, d, "closure matrix")?;
    }
    let n = ops.dim();
    let n_t = ops.grid.n_points();
    let nonlinear = !ops.frozen.sys.is_linear();

    let mut out = DMatrix::zeros(n, n_t);
    let mut u_buf = vec![0.0; ops.frozen.sys.n_inputs()];
    let mut x_prev = vec![0.0; n];
    let mut f_prev = vec![0.0; n];
    let mut f_prev2 = vec![0.0; n];
    let mut col = vec![0.0; n];
    let mut ex = vec![0.0; n];

    for k in 1..n_t {
        if nonlinear && k >= 2 {
            for i in 0..n {
                x_prev[i] = history[(i, k - 2)];
            }
            ops.eval_f(&x_prev, &mut f_prev2);
        }
        for i in 0..n {
            x_prev[i] = history[(i, k - 1)];
        }
        if nonlinear {
            ops.eval_f(&x_prev, &mut f_prev);
        }
        ops.explicit_side(
            k,
            &x_prev,
            nonlinear.then_some(f_prev.as_slice()),
            (nonlinear && k >= 2).then_some(f_prev2.as_slice()),
            &mut u_buf,
            &mut col,
        );
        if let Some(d) = defect {
            for i in 0..n {
                col[i] += d[(i, k)];
            }
        }
        for i in 0..n {
            x_prev[i] = head[(i, k)];
        }
        ops.apply_e(k, &x_prev, &mut ex);
        for i in 0..n {
            out[(i, k)] = col[i] - ex[i];
        }
    }
    Ok(out)
}

/// Residual of the corrected reduced solution: `lifted` holds V x_hat.
pub fn residual_corrected(
    ops: &ImexOps,
    lifted: &DMatrix<f64>,
    defect: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    scheme_residual(ops, lifted, lifted, Some(defect))
}

/// Auxiliary residual: history from full-order snapshots, head from the
/// lifted reduced states.
pub fn auxiliary_residual(
    ops: &ImexOps,
    fom_states: &DMatrix<f64>,
    lifted: &DMatrix<f64>,
    defect: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    scheme_residual(ops, fom_states, lifted, Some(defect))
}

/// The equivalent closed form E(k)(x^k - g^k) of the auxiliary residual,
/// exact when the closure column is the exact defect of `fom_states`.
pub fn auxiliary_identity_form(
    ops: &ImexOps,
    fom_states: &DMatrix<f64>,
    lifted: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_states(ops, fom_states, "full-order states")?;
    check_states(ops, lifted, "lifted states")?;
    let n = ops.dim();
    let n_t = ops.grid.n_points();
    let mut out = DMatrix::zeros(n, n_t);
    let mut diff = vec![0.0; n];
    let mut ed = vec![0.0; n];
    for k in 1..n_t {
        for i in 0..n {
            diff[i] = fom_states[(i, k)] - lifted[(i, k)];
        }
        ops.apply_e(k, &diff, &mut ed);
        for i in 0..n {
            out[(i, k)] = ed[i];
        }
    }
    Ok(out)
}

/// Corrected-ROM residual split under interpolation of the nonlinearity:
/// the first matrix uses I[f] in the explicit side, the second is the
/// interpolation error term
///
///     e_H^k = dt (w1 (f - I[f])(h^{k-1}) + w2 (f - I[f])(h^{k-2})),
///
/// so that their sum recovers the exact-residual assembly.
pub fn residual_corrected_split(
    ops: &ImexOps,
    lifted: &DMatrix<f64>,
    defect: &DMatrix<f64>,
    deim: &DeimProjector,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_states(ops, lifted, "lifted states")?;
    check_states(ops, defect, "closure matrix")?;
    if ops.frozen.sys.is_linear() {
        return Err(Error::InvalidArgument(
            "interpolation split applies to nonlinear systems only".into(),
        ));
    }
    if deim.u.nrows() != ops.dim() {
        return Err(Error::DimensionMismatch {
            context: "interpolation basis rows".into(),
            expected: ops.dim(),
            got: deim.u.nrows(),
        });
    }
    let n = ops.dim();
    let n_t = ops.grid.n_points();
    let dt = ops.grid.dt;

    // Exact and interpolated nonlinearity at every state column.
    let mut f_cols = DMatrix::zeros(n, n_t);
    let mut f_int = DMatrix::zeros(n, n_t);
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut lifted_f = vec![0.0; n];
    for k in 0..n_t {
        for i in 0..n {
            x[i] = lifted[(i, k)];
        }
        ops.eval_f(&x, &mut f);
        deim.interpolate_full(&f, &mut lifted_f)?;
        for i in 0..n {
            f_cols[(i, k)] = f[i];
            f_int[(i, k)] = lifted_f[i];
        }
    }

    let mut r_int = DMatrix::zeros(n, n_t);
    let mut e_h = DMatrix::zeros(n, n_t);
    let mut u_buf = vec![0.0; ops.frozen.sys.n_inputs()];
    let mut col = vec![0.0; n];
    let mut ex = vec![0.0; n];
    let mut fp = vec![0.0; n];
    let mut fp2 = vec![0.0; n];
    for k in 1..n_t {
        let (w1, w2) = ops.scheme.f_weights(k);
        for i in 0..n {
            x[i] = lifted[(i, k - 1)];
            fp[i] = f_int[(i, k - 1)];
        }
        if k >= 2 {
            for i in 0..n {
                fp2[i] = f_int[(i, k - 2)];
            }
        }
        ops.explicit_side(
            k,
            &x,
            Some(fp.as_slice()),
            (k >= 2).then_some(fp2.as_slice()),
            &mut u_buf,
            &mut col,
        );
        for i in 0..n {
            col[i] += defect[(i, k)];
        }
        for i in 0..n {
            x[i] = lifted[(i, k)];
        }
        ops.apply_e(k, &x, &mut ex);
        for i in 0..n {
            r_int[(i, k)] = col[i] - ex[i];
            let mut err = dt * w1 * (f_cols[(i, k - 1)] - f_int[(i, k - 1)]);
            if k >= 2 && w2 != 0.0 {
                err += dt * w2 * (f_cols[(i, k - 2)] - f_int[(i, k - 2)]);
            }
            e_h[(i, k)] = err;
        }
    }
    Ok((r_int, e_h))
}

/// Per-column 2-norms; entry k corresponds to step k.
pub fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.ncols()).map(|k| m.column(k).norm()).collect()
}
