//! A posteriori error estimation for closure-corrected reduced models.
//!
//! The pieces assembled here follow one chain: a steady dual problem turns
//! output errors into residual functionals (`dual`), the corrected and
//! auxiliary residuals measure how far lifted reduced states are from
//! satisfying the imposed scheme (`residual`), operator norms of the scheme
//! matrices give a rigorous state error bound (`bounds`), and the ratio
//! rho_bar transfers the computable residual into an output error estimate
//! that inherits accuracy from the data-driven closure.
//!
//! Two estimator variants are offered. Variant b,
//!
//!     delta_b^k = (rho_bar ||E^-1|| ||r_du|| + |1 - rho_bar| ||x_du||) ||r^k||,
//!
//! needs only the corrected residual norms. Variant a adds the gap between
//! the modified output of the corrected ROM and the output of the reduced
//! model integrated by the adaptive solver, delta_a^k = delta_b^k +
//! ||ybar^k - yhat^k||. Both are averaged over the time grid to a single
//! scalar per parameter for greedy selection.

pub mod bounds;
pub mod dual;
pub mod residual;

pub use bounds::{
    lipschitz_estimate, stability_constants, state_error_bound, StabilityConstants,
};
pub use dual::{solve_dual, DualSolution};
pub use residual::{
    auxiliary_identity_form, auxiliary_residual, column_norms, residual_corrected,
    residual_corrected_split, scheme_residual,
};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::str::FromStr;

/// Step index at which the scheme coefficients have reached their steady
/// values; the two-step scheme starts up with a one-step first step.
pub(crate) const STEADY_STEP: usize = 2;

/// Residual norms at or below this threshold are treated as exact zeros in
/// the ratio rho.
const DEGENERATE_NORM: f64 = 1e-14;

/// Which output error estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    /// Residual term plus the corrected-vs-adaptive output gap.
    A,
    /// Residual term only; the default for greedy sweeps.
    B,
}

impl EstimatorVariant {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorVariant::A => "a",
            EstimatorVariant::B => "b",
        }
    }
}

impl FromStr for EstimatorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(EstimatorVariant::A),
            "b" => Ok(EstimatorVariant::B),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator variant {other:?}, expected \"a\" or \"b\""
            ))),
        }
    }
}

/// Per-step output error estimate with the constants that produced it.
#[derive(Debug, Clone)]
pub struct ErrorEstimate {
    /// Estimate per time point; entry 0 belongs to the initial condition
    /// and is zero.
    pub per_step: Vec<f64>,
    /// Time average of `per_step` over the number of steps.
    pub mean: f64,
    /// Residual ratio used to build the estimate.
    pub rho_bar: f64,
    /// Variant the estimate was assembled for.
    pub variant: EstimatorVariant,
    /// ||E^-1||_2 estimate entering the dual residual term.
    pub e_inv_norm: f64,
    /// Norm of the (approximate) dual solution.
    pub x_du_norm: f64,
}

fn check_norm_sequence(name: &str, values: &[f64]) -> Result<()> {
    if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{name} must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

fn check_scalar(name: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{name} must be finite and nonnegative, got {value}"
        )));
    }
    Ok(value)
}

/// Mean ratio of auxiliary to corrected residual norms over steps 1..K.
/// Entry 0 of both inputs belongs to the initial condition and is ignored.
/// Steps where both norms vanish contribute 1; a vanishing corrected
/// residual against a surviving auxiliary residual is degenerate and
/// reported as an error.
pub fn rho_bar(residual_norms: &[f64], aux_norms: &[f64]) -> Result<f64> {
    if residual_norms.len() != aux_norms.len() {
        return Err(Error::DimensionMismatch {
            context: "residual ratio sequences".into(),
            expected: residual_norms.len(),
            got: aux_norms.len(),
        });
    }
    if residual_norms.len() < 2 {
        return Err(Error::InvalidArgument(
            "residual ratio needs at least one step beyond the initial condition".into(),
        ));
    }
    check_norm_sequence("corrected residual norms", residual_norms)?;
    check_norm_sequence("auxiliary residual norms", aux_norms)?;

    let steps = residual_norms.len() - 1;
    let mut sum = 0.0;
    for k in 1..residual_norms.len() {
        let r = residual_norms[k];
        let aux = aux_norms[k];
        let ratio = if r <= DEGENERATE_NORM && aux <= DEGENERATE_NORM {
            1.0
        } else if r <= DEGENERATE_NORM {
            return Err(Error::DegenerateRatio { step: k, aux_norm: aux });
        } else {
            aux / r
        };
        sum += ratio;
    }
    Ok(sum / steps as f64)
}

/// Assembles the per-step output error estimate of the requested variant
/// from precomputed norms. Variant a additionally needs the per-step gap
/// ||ybar^k - yhat^k|| between the modified corrected output and the output
/// of the adaptively integrated reduced model.
pub fn output_error_estimate(
    variant: EstimatorVariant,
    residual_norms: &[f64],
    r_du_norm: f64,
    e_inv_norm: f64,
    x_du_norm: f64,
    rho: f64,
    output_gap: Option<&[f64]>,
) -> Result<ErrorEstimate> {
    if residual_norms.len() < 2 {
        return Err(Error::InvalidArgument(
            "estimate needs at least one step beyond the initial condition".into(),
        ));
    }
    check_norm_sequence("residual norms", residual_norms)?;
    check_scalar("dual residual norm", r_du_norm)?;
    check_scalar("operator norm estimate", e_inv_norm)?;
    check_scalar("dual solution norm", x_du_norm)?;
    check_scalar("residual ratio", rho)?;
    let gap = match (variant, output_gap) {
        (EstimatorVariant::A, Some(g)) => {
            if g.len() != residual_norms.len() {
                return Err(Error::DimensionMismatch {
                    context: "output gap sequence".into(),
                    expected: residual_norms.len(),
                    got: g.len(),
                });
            }
            check_norm_sequence("output gap", g)?;
            Some(g)
        }
        (EstimatorVariant::A, None) => {
            return Err(Error::MissingInput(
                "output gap sequence required by estimator variant a".into(),
            ))
        }
        (EstimatorVariant::B, _) => None,
    };

    let factor = rho * e_inv_norm * r_du_norm + (1.0 - rho).abs() * x_du_norm;
    let mut per_step = Vec::with_capacity(residual_norms.len());
    per_step.push(0.0);
    for k in 1..residual_norms.len() {
        let mut value = factor * residual_norms[k];
        if let Some(g) = gap {
            value += g[k];
        }
        per_step.push(value);
    }
    let steps = (per_step.len() - 1) as f64;
    let mean = per_step.iter().sum::<f64>() / steps;
    Ok(ErrorEstimate {
        per_step,
        mean,
        rho_bar: rho,
        variant,
        e_inv_norm,
        x_du_norm,
    })
}

/// Dual-weighted output correction ybar^k = yhat^k - x_du^T r^k applied
/// column by column. `outputs` is N_O x N_t, `x_du` is N x N_O and
/// `residuals` is N x N_t.
pub fn modified_output(
    outputs: &DMatrix<f64>,
    x_du: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if x_du.ncols() != outputs.nrows() {
        return Err(Error::DimensionMismatch {
            context: "dual columns vs output rows".into(),
            expected: outputs.nrows(),
            got: x_du.ncols(),
        });
    }
    if x_du.nrows() != residuals.nrows() {
        return Err(Error::DimensionMismatch {
            context: "dual rows vs residual rows".into(),
            expected: residuals.nrows(),
            got: x_du.nrows(),
        });
    }
    if residuals.ncols() != outputs.ncols() {
        return Err(Error::DimensionMismatch {
            context: "residual columns vs output columns".into(),
            expected: outputs.ncols(),
            got: residuals.ncols(),
        });
    }
    Ok(outputs - x_du.tr_mul(residuals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::defect_with_ops;
    use crate::linalg::{svd_sorted, PowerIterOpts};
    use crate::models::{assemble, ModelId, TimeGrid};
    use crate::timestepping::{solve_blackbox, ImexOps, ImexScheme, SolverConfig};

    fn pod_projection(states: &DMatrix<f64>, n_modes: usize) -> DMatrix<f64> {
        let (u, _, _) = svd_sorted(states).unwrap();
        let v = DMatrix::from(u.columns(0, n_modes.min(u.ncols())));
        &v * v.tr_mul(states)
    }

    struct HeatScenario<'a> {
        ops: ImexOps<'a>,
        truth: DMatrix<f64>,
        lifted: DMatrix<f64>,
        defect: DMatrix<f64>,
    }

    fn heat_scenario(
        sys: &dyn crate::models::OdeSystem,
        n_modes: usize,
        steps: usize,
    ) -> HeatScenario<'_> {
        let p = [0.06];
        let grid = TimeGrid::new(0.0, 0.01, steps).unwrap();
        let traj = solve_blackbox(sys, &p, grid, &SolverConfig::default()).unwrap();
        let ops = ImexOps::new(sys, &p, grid, ImexScheme::Order1).unwrap();
        let defect = defect_with_ops(&ops, &traj).unwrap();
        let lifted = pod_projection(&traj.states, n_modes);
        HeatScenario {
            ops,
            truth: traj.states,
            lifted,
            defect,
        }
    }

    #[test]
    fn variant_labels_round_trip() {
        for v in [EstimatorVariant::A, EstimatorVariant::B] {
            assert_eq!(v.label().parse::<EstimatorVariant>().unwrap(), v);
        }
        assert!("c".parse::<EstimatorVariant>().is_err());
    }

    #[test]
    fn residual_ratio_matches_a_scripted_oracle() {
        let sys = assemble(ModelId::Heat, &[0.06], 48).unwrap();
        let sc = heat_scenario(sys.as_ref(), 5, 40);
        let r = residual_corrected(&sc.ops, &sc.lifted, &sc.defect).unwrap();
        let aux = auxiliary_residual(&sc.ops, &sc.truth, &sc.lifted, &sc.defect).unwrap();
        let r_norms = column_norms(&r);
        let aux_norms = column_norms(&aux);

        let rho = rho_bar(&r_norms, &aux_norms).unwrap();
        let mut oracle = 0.0;
        for k in 1..r_norms.len() {
            oracle += aux.column(k).norm() / r.column(k).norm();
        }
        oracle /= (r_norms.len() - 1) as f64;
        assert!((rho - oracle).abs() <= 1e-12 * oracle.max(1.0));
        assert!(rho.is_finite() && rho > 0.0);
    }

    #[test]
    fn residual_ratio_degenerate_rules() {
        // Both residuals vanish at every step: the exact-ROM convention.
        let zeros = vec![0.0; 6];
        assert_eq!(rho_bar(&zeros, &zeros).unwrap(), 1.0);

        // Identical nonzero sequences give exactly one.
        let r = vec![0.0, 0.3, 0.7, 0.2];
        assert_eq!(rho_bar(&r, &r).unwrap(), 1.0);

        // A vanishing corrected residual against a surviving auxiliary one
        // is degenerate.
        let aux = vec![0.0, 0.3, 0.5, 0.2];
        let mut bad = r.clone();
        bad[2] = 0.0;
        match rho_bar(&bad, &aux) {
            Err(Error::DegenerateRatio { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected a degenerate-ratio error, got {other:?}"),
        }

        assert!(rho_bar(&r, &aux[..3]).is_err());
        assert!(rho_bar(&[0.0], &[0.0]).is_err());
        assert!(rho_bar(&[0.0, -1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_residuals_give_a_zero_estimate() {
        let r = vec![0.0; 10];
        let est =
            output_error_estimate(EstimatorVariant::B, &r, 0.0, 2.0, 1.5, 1.0, None).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(est.per_step.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn variant_a_dominates_variant_b_and_validates_inputs() {
        let r: Vec<f64> = (0..20).map(|k| 0.1 + 0.05 * (k as f64).sin().abs()).collect();
        let gap: Vec<f64> = (0..20).map(|k| 0.01 * (k % 3) as f64).collect();
        let b = output_error_estimate(EstimatorVariant::B, &r, 0.2, 3.0, 1.1, 0.9, None)
            .unwrap();
        let a = output_error_estimate(
            EstimatorVariant::A,
            &r,
            0.2,
            3.0,
            1.1,
            0.9,
            Some(&gap),
        )
        .unwrap();
        assert_eq!(a.per_step[0], 0.0);
        assert_eq!(b.per_step[0], 0.0);
        for k in 0..r.len() {
            assert!(a.per_step[k] >= b.per_step[k]);
            assert!(a.per_step[k].is_finite() && a.per_step[k] >= 0.0);
        }
        assert!(a.mean >= b.mean);
        let mean_oracle = b.per_step.iter().sum::<f64>() / (r.len() - 1) as f64;
        assert!((b.mean - mean_oracle).abs() <= 1e-15);

        assert!(matches!(
            output_error_estimate(EstimatorVariant::A, &r, 0.2, 3.0, 1.1, 0.9, None),
            Err(Error::MissingInput(_))
        ));
        assert!(output_error_estimate(EstimatorVariant::B, &r, -0.2, 3.0, 1.1, 0.9, None)
            .is_err());
        assert!(output_error_estimate(EstimatorVariant::B, &r, 0.2, 3.0, 1.1, f64::NAN, None)
            .is_err());
        assert!(
            output_error_estimate(EstimatorVariant::A, &r, 0.2, 3.0, 1.1, 0.9, Some(&gap[..5]))
                .is_err()
        );
    }

    #[test]
    fn modified_output_matches_an_inner_product_oracle() {
        let n = 7;
        let n_t = 5;
        let n_o = 2;
        let outputs = DMatrix::from_fn(n_o, n_t, |o, k| (o as f64 + 1.0) * (k as f64 * 0.3).cos());
        let x_du = DMatrix::from_fn(n, n_o, |i, o| ((i + 2 * o) as f64 * 0.17).sin());
        let r = DMatrix::from_fn(n, n_t, |i, k| ((i * k) as f64 * 0.05).cos() * 0.01);
        let bar = modified_output(&outputs, &x_du, &r).unwrap();
        for o in 0..n_o {
            for k in 0..n_t {
                let mut corr = 0.0;
                for i in 0..n {
                    corr += x_du[(i, o)] * r[(i, k)];
                }
                let expected = outputs[(o, k)] - corr;
                assert!((bar[(o, k)] - expected).abs() <= 1e-14);
            }
        }

        let zeros = DMatrix::zeros(n, n_t);
        assert_eq!(modified_output(&outputs, &x_du, &zeros).unwrap(), outputs);
        assert!(modified_output(&outputs, &x_du, &DMatrix::zeros(n + 1, n_t)).is_err());
    }

    #[test]
    fn dual_weighted_bound_holds_term_by_term() {
        // With an exact closure and a full dual solve, the true modified
        // output error obeys the two-term bound at every step.
        let sys = assemble(ModelId::Heat, &[0.06], 64).unwrap();
        let sc = heat_scenario(sys.as_ref(), 4, 60);
        let c = sys.output_matrix();
        let dual = solve_dual(&sc.ops, None).unwrap();
        let constants = stability_constants(
            &sc.ops,
            0.0,
            PowerIterOpts {
                max_iter: 1000,
                rel_tol: 1e-12,
                seed: 3,
            },
        )
        .unwrap();

        let r = residual_corrected(&sc.ops, &sc.lifted, &sc.defect).unwrap();
        let aux = auxiliary_residual(&sc.ops, &sc.truth, &sc.lifted, &sc.defect).unwrap();
        let y = &c * &sc.truth;
        let y_hat = &c * &sc.lifted;
        let y_bar = modified_output(&y_hat, &dual.x_du, &r).unwrap();

        let r_du_norm = dual.r_du_norm();
        let x_du_norm = dual.x_du_norm();
        assert!(r_du_norm <= 1e-10, "full dual must solve its system");

        for k in 1..sc.ops.grid.n_points() {
            let lhs = (y.column(k) - y_bar.column(k)).norm();
            let rhs = constants.zeta * r_du_norm * aux.column(k).norm()
                + x_du_norm * (r.column(k) - aux.column(k)).norm();
            assert!(
                lhs <= rhs * (1.0 + 1e-10) + 1e-14,
                "bound violated at step {k}: {lhs:.3e} > {rhs:.3e}"
            );
        }
    }

    #[test]
    fn dual_correction_improves_the_output_at_most_steps() {
        let sys = assemble(ModelId::Heat, &[0.06], 64).unwrap();
        let sc = heat_scenario(sys.as_ref(), 4, 60);
        let c = sys.output_matrix();
        let dual = solve_dual(&sc.ops, None).unwrap();
        let r = residual_corrected(&sc.ops, &sc.lifted, &sc.defect).unwrap();
        let y = &c * &sc.truth;
        let y_hat = &c * &sc.lifted;
        let y_bar = modified_output(&y_hat, &dual.x_du, &r).unwrap();

        let steps = sc.ops.grid.n_points() - 1;
        let mut improved = 0usize;
        for k in 1..=steps {
            let plain = (y.column(k) - y_hat.column(k)).norm();
            let corrected = (y.column(k) - y_bar.column(k)).norm();
            if corrected <= plain {
                improved += 1;
            }
        }
        assert!(
            improved * 10 >= steps * 9,
            "correction helped at only {improved}/{steps} steps"
        );
    }

    #[test]
    fn dropping_the_closure_overestimates_the_output_error() {
        // Without the closure the imposed-scheme residual carries the full
        // defect of the adaptive solver. Fed into the data-free estimate
        // (rho = 1, gap term included) it overshoots the true output error
        // of an accurate reduced solution by orders of magnitude.
        let sys = assemble(ModelId::Heat, &[0.06], 64).unwrap();
        let sc = heat_scenario(sys.as_ref(), 8, 60);
        let c = sys.output_matrix();
        let dual = solve_dual(&sc.ops, None).unwrap();
        let constants = stability_constants(&sc.ops, 0.0, PowerIterOpts::default()).unwrap();

        let zeros = DMatrix::zeros(sc.ops.dim(), sc.ops.grid.n_points());
        let r = residual_corrected(&sc.ops, &sc.lifted, &zeros).unwrap();
        let y = &c * &sc.truth;
        let y_hat = &c * &sc.lifted;
        let y_bar = modified_output(&y_hat, &dual.x_du, &r).unwrap();
        let gap = column_norms(&(&y_bar - &y_hat));
        let est = output_error_estimate(
            EstimatorVariant::A,
            &column_norms(&r),
            dual.r_du_norm(),
            constants.zeta,
            dual.x_du_norm(),
            1.0,
            Some(&gap),
        )
        .unwrap();

        let steps = sc.ops.grid.n_points() - 1;
        let mut overestimated = 0usize;
        for k in 1..=steps {
            let true_err = (y.column(k) - y_hat.column(k)).norm();
            if est.per_step[k] >= 100.0 * true_err {
                overestimated += 1;
            }
        }
        assert!(
            2 * overestimated >= steps,
            "closure-free estimate exceeded 100x the true error at only {overestimated}/{steps} steps"
        );
    }
}
