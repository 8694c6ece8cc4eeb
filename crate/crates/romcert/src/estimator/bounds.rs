//! Stability constants and the rigorous state error bound.
//!
//! For the one- and two-step schemes used here the implicit operator E and
//! the explicit operator G become step-independent once the startup step has
//! passed, so the bound constants are evaluated at a steady step. The state
//! error of any comparison sequence then satisfies the recurrence
//!
//!     delta^k = xi * delta^{k-1} + zeta * ||r^k||,   delta^0 = ||e^0||,
//!
//! with zeta = ||E^-1||_2 and xi = ||E^-1 G||_2 + dt * L_f * zeta, where L_f
//! is a Lipschitz constant of the nonlinearity. For linear systems (L_f = 0)
//! and a matched scheme the result is a true upper bound; with the sampled
//! Lipschitz estimate below it becomes a sharp error indicator.

use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenvalue_spd, PowerIterOpts};
use crate::models::OdeSystem;
use crate::timestepping::ImexOps;
use nalgebra::DMatrix;

use super::STEADY_STEP;

/// Operator norms entering the state error bound.
#[derive(Debug, Clone, Copy)]
pub struct StabilityConstants {
    /// ||E^-1||_2 at the steady step.
    pub zeta: f64,
    /// ||E^-1 G||_2 at the steady step.
    pub e_inv_a_norm: f64,
    /// Lipschitz constant of the nonlinearity (0 for linear systems).
    pub lipschitz: f64,
    /// Time step the constants were assembled for.
    pub dt: f64,
}

impl StabilityConstants {
    /// Growth factor xi = ||E^-1 G||_2 + dt * L_f * ||E^-1||_2.
    pub fn xi(&self) -> f64 {
        self.e_inv_a_norm + self.dt * self.lipschitz * self.zeta
    }
}

/// Estimates ||E^-1||_2 and ||E^-1 G||_2 by power iteration on the
/// corresponding normal operators, reusing the factorizations held by `ops`.
pub fn stability_constants(
    ops: &ImexOps,
    lipschitz: f64,
    opts: PowerIterOpts,
) -> Result<StabilityConstants> {
    if !lipschitz.is_finite() || lipschitz < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lipschitz constant must be finite and nonnegative, got {lipschitz}"
        )));
    }
    let n = ops.dim();
    let k = STEADY_STEP;

    let mut scratch = vec![0.0; n];
    let zeta_sq = dominant_eigenvalue_spd(
        n,
        |x, out| {
            ops.solve_e(k, x, &mut scratch);
            ops.solve_e_transpose(k, &scratch, out);
        },
        opts,
    );

    let c_ex = ops.scheme.explicit_a_shift(k) * ops.grid.dt;
    let mut t1 = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    let eia_sq = dominant_eigenvalue_spd(
        n,
        |x, out| {
            ops.apply_g(k, x, &mut t1);
            ops.solve_e(k, &t1, &mut t2);
            ops.solve_e_transpose(k, &t2, &mut t1);
            // G^T y = y + c_ex * A^T y.
            ops.frozen.a.mul_vec_transpose(&t1, out);
            for (o, &y) in out.iter_mut().zip(&t1) {
                *o = y + c_ex * *o;
            }
        },
        opts,
    );

    Ok(StabilityConstants {
        zeta: zeta_sq.max(0.0).sqrt(),
        e_inv_a_norm: eia_sq.max(0.0).sqrt(),
        lipschitz,
        dt: ops.grid.dt,
    })
}

/// Sampled lower estimate of the Lipschitz constant of the nonlinearity on
/// the range covered by the given state columns: the largest difference
/// quotient ||f(x_i) - f(x_j)|| / ||x_i - x_j|| over an evenly thinned
/// subset of at most `max_samples` columns. Returns 0 for linear systems.
pub fn lipschitz_estimate(
    sys: &dyn OdeSystem,
    p: &[f64],
    states: &DMatrix<f64>,
    max_samples: usize,
) -> f64 {
    if sys.is_linear() || states.ncols() < 2 || max_samples < 2 {
        return 0.0;
    }
    let n = states.nrows();
    let m = states.ncols().min(max_samples);
    let stride = (states.ncols() - 1) as f64 / (m - 1) as f64;
    let cols: Vec<usize> = (0..m).map(|i| (i as f64 * stride).round() as usize).collect();

    let mut f_cols = DMatrix::zeros(n, m);
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    for (j, &c) in cols.iter().enumerate() {
        for i in 0..n {
            x[i] = states[(i, c)];
        }
        sys.nonlinear(p, &x, &mut f);
        for i in 0..n {
            f_cols[(i, j)] = f[i];
        }
    }

    let scale = states.norm().max(1e-300);
    let mut best = 0.0f64;
    for a in 0..m {
        for b in (a + 1)..m {
            let dx = (states.column(cols[a]) - states.column(cols[b])).norm();
            if dx <= 1e-14 * scale {
                continue;
            }
            let df = (f_cols.column(a) - f_cols.column(b)).norm();
            best = best.max(df / dx);
        }
    }
    best
}

/// Accumulates the per-step state error bound by the recurrence
/// delta^k = xi delta^{k-1} + zeta ||r^k||, starting from the initial error
/// norm. Entry 0 of `residual_norms` belongs to the initial condition and is
/// ignored; the returned vector matches its length.
pub fn state_error_bound(
    constants: &StabilityConstants,
    e0_norm: f64,
    residual_norms: &[f64],
) -> Result<Vec<f64>> {
    if !e0_norm.is_finite() || e0_norm < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "initial error norm must be finite and nonnegative, got {e0_norm}"
        )));
    }
    if let Some(bad) = residual_norms.iter().find(|r| !r.is_finite() || **r < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "residual norms must be finite and nonnegative, got {bad}"
        )));
    }
    let xi = constants.xi();
    let zeta = constants.zeta;
    let mut out = Vec::with_capacity(residual_norms.len());
    if residual_norms.is_empty() {
        return Ok(out);
    }
    let mut delta = e0_norm;
    out.push(delta);
    for &r in &residual_norms[1..] {
        delta = xi * delta + zeta * r;
        out.push(delta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::residual::{column_norms, scheme_residual};
    use crate::models::{assemble, ModelId, TimeGrid};
    use crate::timestepping::{solve_blackbox, ImexScheme, SolverConfig};
    use nalgebra::DMatrix;

    fn tight() -> PowerIterOpts {
        PowerIterOpts {
            max_iter: 2000,
            rel_tol: 1e-13,
            seed: 7,
        }
    }

    #[test]
    fn operator_norms_match_a_dense_decomposition() {
        let p = [0.06];
        let sys = assemble(ModelId::Heat, &p, 24).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 12).unwrap();
        for scheme in [ImexScheme::Order1, ImexScheme::Order2] {
            let ops = ImexOps::new(sys.as_ref(), &p, grid, scheme).unwrap();
            let c = stability_constants(&ops, 0.0, tight()).unwrap();

            let n = ops.dim();
            let a = ops.frozen.a.to_dense();
            let eye = DMatrix::identity(n, n);
            let e = &eye - &a * (scheme.implicit_shift(2) * grid.dt);
            let g = &eye + &a * (scheme.explicit_a_shift(2) * grid.dt);
            let e_inv = e.clone().try_inverse().unwrap();
            let sv_e = (e_inv.clone()).svd(false, false).singular_values;
            let sv_eg = (&e_inv * &g).svd(false, false).singular_values;
            let zeta_dense = sv_e.iter().cloned().fold(0.0f64, f64::max);
            let eia_dense = sv_eg.iter().cloned().fold(0.0f64, f64::max);

            assert!(
                (c.zeta - zeta_dense).abs() <= 1e-8 * zeta_dense,
                "zeta {} vs dense {}",
                c.zeta,
                zeta_dense
            );
            assert!(
                (c.e_inv_a_norm - eia_dense).abs() <= 1e-8 * eia_dense,
                "||E^-1 G|| {} vs dense {}",
                c.e_inv_a_norm,
                eia_dense
            );
            assert_eq!(c.xi(), c.e_inv_a_norm, "linear system has no Lipschitz term");
        }
    }

    #[test]
    fn lipschitz_is_zero_for_linear_systems_and_positive_for_burgers() {
        let heat = assemble(ModelId::Heat, &[0.05], 32).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 20).unwrap();
        let traj = solve_blackbox(heat.as_ref(), &[0.05], grid, &SolverConfig::default()).unwrap();
        assert_eq!(lipschitz_estimate(heat.as_ref(), &[0.05], &traj.states, 10), 0.0);

        let p = [0.2];
        let burgers = assemble(ModelId::Burgers, &p, 48).unwrap();
        let traj = solve_blackbox(burgers.as_ref(), &p, grid, &SolverConfig::default()).unwrap();
        let est = lipschitz_estimate(burgers.as_ref(), &p, &traj.states, 12);
        assert!(est.is_finite() && est > 0.0);

        // The estimate dominates every quotient it is built from; check one
        // pair by hand.
        let n = traj.states.nrows();
        let (mut fa, mut fb) = (vec![0.0; n], vec![0.0; n]);
        let xa = traj.states.column(0).clone_owned();
        let xb = traj.states.column(grid.n_points() - 1).clone_owned();
        burgers.nonlinear(&p, xa.as_slice(), &mut fa);
        burgers.nonlinear(&p, xb.as_slice(), &mut fb);
        let quotient = (DMatrix::from_column_slice(n, 1, &fa) - DMatrix::from_column_slice(n, 1, &fb)).norm()
            / (&xa - &xb).norm();
        assert!(est >= quotient * (1.0 - 1e-12));
    }

    #[test]
    fn recurrence_matches_the_closed_form_sum() {
        let constants = StabilityConstants {
            zeta: 2.3,
            e_inv_a_norm: 0.91,
            lipschitz: 1.5,
            dt: 0.04,
        };
        let xi = constants.xi();
        let e0 = 0.11;
        let r: Vec<f64> = (0..40).map(|k| 0.3 + 0.2 * ((k as f64) * 0.7).sin()).collect();
        let bound = state_error_bound(&constants, e0, &r).unwrap();
        for k in 0..r.len() {
            let mut closed = xi.powi(k as i32) * e0;
            for i in 1..=k {
                closed += constants.zeta * xi.powi((k - i) as i32) * r[i];
            }
            assert!(
                (bound[k] - closed).abs() <= 1e-12 * closed.abs().max(1.0),
                "step {k}: recurrence {} vs closed form {closed}",
                bound[k]
            );
        }

        assert!(state_error_bound(&constants, -1.0, &r).is_err());
        assert!(state_error_bound(&constants, 0.0, &[0.0, f64::NAN]).is_err());
        assert!(state_error_bound(&constants, 0.5, &[]).unwrap().is_empty());
    }

    #[test]
    fn bound_dominates_the_true_error_of_a_perturbed_linear_solution() {
        let p = [0.07];
        let sys = assemble(ModelId::Heat, &p, 40).unwrap();
        let grid = TimeGrid::new(0.0, 0.005, 60).unwrap();
        let ops = ImexOps::new(sys.as_ref(), &p, grid, ImexScheme::Order1).unwrap();
        let truth = ops.march(None).unwrap().states;

        // Any comparison sequence works; perturb the exact march smoothly.
        let n = ops.dim();
        let approx = DMatrix::from_fn(n, grid.n_points(), |i, k| {
            truth[(i, k)] + 1e-3 * ((i as f64 * 0.4).sin() * (k as f64 * 0.2).cos())
        });
        let r = scheme_residual(&ops, &approx, &approx, None).unwrap();
        let r_norms = column_norms(&r);

        // Exact constants from a dense decomposition keep this a pure test
        // of the bound formula; power-iteration accuracy is checked above.
        let a = ops.frozen.a.to_dense();
        let eye = DMatrix::identity(n, n);
        let e = &eye - &a * (ops.scheme.implicit_shift(2) * grid.dt);
        let g = &eye + &a * (ops.scheme.explicit_a_shift(2) * grid.dt);
        let e_inv = e.try_inverse().unwrap();
        let sv_e = e_inv.clone().svd(false, false).singular_values;
        let sv_eg = (&e_inv * &g).svd(false, false).singular_values;
        let constants = StabilityConstants {
            zeta: sv_e.iter().cloned().fold(0.0f64, f64::max),
            e_inv_a_norm: sv_eg.iter().cloned().fold(0.0f64, f64::max),
            lipschitz: 0.0,
            dt: grid.dt,
        };

        let e0 = (truth.column(0) - approx.column(0)).norm();
        let bound = state_error_bound(&constants, e0, &r_norms).unwrap();
        for k in 0..grid.n_points() {
            let err = (truth.column(k) - approx.column(k)).norm();
            assert!(
                bound[k] >= err * (1.0 - 1e-12),
                "bound {} fails to dominate error {err} at step {k}",
                bound[k]
            );
            assert!(bound[k].is_finite());
        }
    }
}
