use crate::error::{Error, Result};
use crate::models::{FrozenSystem, OdeSystem, Provenance, TimeGrid, Trajectory};
use nalgebra::DMatrix;

/// Controls for the adaptive black-box integrator.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// None lets the solver pick a starting step from the initial slope.
    pub initial_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 20_000_000,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
// Fifth-order weights, which are also the seventh stage row: the last
// evaluation of one step is the first of the next (FSAL).
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the fifth- and fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Weights of the extra dense-output polynomial coefficient.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI step-size controller, classic settings for this pair.
const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2; // strongest shrink of h per step
const FAC_MAX: f64 = 10.0; // strongest growth of h per step

/// Integrate the frozen system over the grid span with the embedded 5(4)
/// pair and sample the quartic interpolant at every grid point.
pub fn integrate_dense(
    frozen: &FrozenSystem,
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<(DMatrix<f64>, SolveStats)> {
    let n = frozen.sys.dim();
    let mut stats = SolveStats::default();
    let mut u_buf = vec![0.0; frozen.sys.n_inputs()];

    let mut y = frozen.sys.initial_state(&frozen.p)?;
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            context: "initial state".into(),
            expected: n,
            got: y.len(),
        });
    }
    let mut t = grid.t0;
    let t_end = grid.t_end();

    let mut out = DMatrix::zeros(n, grid.n_points());
    for i in 0..n {
        out[(i, 0)] = y[i];
    }
    let mut next_grid = 1usize;

    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; n]).collect();
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    // k1 of the first step; afterwards the FSAL swap provides it.
    frozen.rhs(t, &y, &mut u_buf, &mut k[0]);
    stats.rhs_evals += 1;

    let mut h = match cfg.initial_step {
        Some(h0) => h0,
        None => initial_step_guess(frozen, t, &y, &k[0], cfg, &mut u_buf, &mut stats),
    };
    h = h.min(t_end - t).max(f64::MIN_POSITIVE);

    let mut fac_old: f64 = 1e-4;
    let mut rejected_last = false;

    while t < t_end {
        if stats.accepted + stats.rejected > cfg.max_steps {
            return Err(Error::IntegrationFailure {
                t_last: t,
                reason: format!("exceeded max_steps = {}", cfg.max_steps),
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                t_last: t,
                reason: format!("step size collapsed to {h:.3e}"),
            });
        }
        let mut last = false;
        if t + h >= t_end {
            h = t_end - t;
            last = true;
        }

        // Each combination loop pins its slices to length n up front so the
        // compiler drops per-element bounds checks and vectorizes.
        {
            let (yv, ys, k0) = (&y[..n], &mut y_stage[..n], &k[0][..n]);
            for i in 0..n {
                ys[i] = yv[i] + h * (A21 * k0[i]);
            }
        }
        frozen.rhs(t + C2 * h, &y_stage, &mut u_buf, &mut k[1]);
        {
            let (yv, ys, k0, k1) = (&y[..n], &mut y_stage[..n], &k[0][..n], &k[1][..n]);
            for i in 0..n {
                ys[i] = yv[i] + h * (A31 * k0[i] + A32 * k1[i]);
            }
        }
        frozen.rhs(t + C3 * h, &y_stage, &mut u_buf, &mut k[2]);
        {
            let (yv, ys) = (&y[..n], &mut y_stage[..n]);
            let (k0, k1, k2) = (&k[0][..n], &k[1][..n], &k[2][..n]);
            for i in 0..n {
                ys[i] = yv[i] + h * (A41 * k0[i] + A42 * k1[i] + A43 * k2[i]);
            }
        }
        frozen.rhs(t + C4 * h, &y_stage, &mut u_buf, &mut k[3]);
        {
            let (yv, ys) = (&y[..n], &mut y_stage[..n]);
            let (k0, k1, k2, k3) = (&k[0][..n], &k[1][..n], &k[2][..n], &k[3][..n]);
            for i in 0..n {
                ys[i] = yv[i] + h * (A51 * k0[i] + A52 * k1[i] + A53 * k2[i] + A54 * k3[i]);
            }
        }
        frozen.rhs(t + C5 * h, &y_stage, &mut u_buf, &mut k[4]);
        {
            let (yv, ys) = (&y[..n], &mut y_stage[..n]);
            let (k0, k1, k2, k3, k4) =
                (&k[0][..n], &k[1][..n], &k[2][..n], &k[3][..n], &k[4][..n]);
            for i in 0..n {
                ys[i] = yv[i]
                    + h * (A61 * k0[i] + A62 * k1[i] + A63 * k2[i] + A64 * k3[i] + A65 * k4[i]);
            }
        }
        frozen.rhs(t + h, &y_stage, &mut u_buf, &mut k[5]);
        // Fifth-order solution, then the FSAL stage at (t + h, y_new).
        {
            let (yv, yn) = (&y[..n], &mut y_new[..n]);
            let (k0, k2, k3, k4, k5) =
                (&k[0][..n], &k[2][..n], &k[3][..n], &k[4][..n], &k[5][..n]);
            for i in 0..n {
                yn[i] = yv[i]
                    + h * (B1 * k0[i] + B3 * k2[i] + B4 * k3[i] + B5 * k4[i] + B6 * k5[i]);
            }
        }
        frozen.rhs(t + h, &y_new, &mut u_buf, &mut k[6]);
        stats.rhs_evals += 6;

        let mut err_sq = 0.0;
        {
            let (yv, yn) = (&y[..n], &y_new[..n]);
            let (k0, k2, k3, k4, k5, k6) = (
                &k[0][..n],
                &k[2][..n],
                &k[3][..n],
                &k[4][..n],
                &k[5][..n],
                &k[6][..n],
            );
            for i in 0..n {
                let e = h
                    * (E1 * k0[i] + E3 * k2[i] + E4 * k3[i] + E5 * k4[i] + E6 * k5[i]
                        + E7 * k6[i]);
                let scale = cfg.atol + cfg.rtol * yv[i].abs().max(yn[i].abs());
                let q = e / scale;
                err_sq += q * q;
            }
        }
        let err = (err_sq / n as f64).sqrt();
        let fac11 = err.powf(EXPO1);

        if err <= 1.0 {
            let t_new = if last { t_end } else { t + h };
            let slack = 1e-12 * t_new.abs().max(1.0);
            while next_grid < grid.n_points() && grid.point(next_grid) <= t_new + slack {
                let theta = ((grid.point(next_grid) - t) / h).clamp(0.0, 1.0);
                let om = 1.0 - theta;
                for i in 0..n {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k[0][i] - ydiff;
                    let c4 = ydiff - h * k[6][i] - bspl;
                    let c5 = h
                        * (D1 * k[0][i]
                            + D3 * k[2][i]
                            + D4 * k[3][i]
                            + D5 * k[4][i]
                            + D6 * k[5][i]
                            + D7 * k[6][i]);
                    out[(i, next_grid)] =
                        y[i] + theta * (ydiff + om * (bspl + theta * (c4 + om * c5)));
                }
                next_grid += 1;
            }

            stats.accepted += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);

            // PI step control: the previous accepted error enters through
            // fac_old, which is only updated afterwards.
            let fac = (fac11 / fac_old.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if rejected_last {
                h_new = h_new.min(h);
            }
            fac_old = err.max(1e-4);
            h = h_new;
            rejected_last = false;
        } else {
            stats.rejected += 1;
            h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            rejected_last = true;
        }
        if !y.iter().all(|v| v.is_finite()) || !h.is_finite() {
            return Err(Error::IntegrationFailure {
                t_last: t,
                reason: "state or step size became non-finite".into(),
            });
        }
    }

    if next_grid < grid.n_points() {
        return Err(Error::IntegrationFailure {
            t_last: t,
            reason: format!(
                "integration ended before reaching grid point {next_grid} at t = {}",
                grid.point(next_grid)
            ),
        });
    }
    Ok((out, stats))
}

/// Starting step from the slope at t0, refined by one Euler probe.
fn initial_step_guess(
    frozen: &FrozenSystem,
    t: f64,
    y: &[f64],
    f0: &[f64],
    cfg: &SolverConfig,
    u_buf: &mut [f64],
    stats: &mut SolveStats,
) -> f64 {
    let n = y.len();
    let sc: Vec<f64> = y
        .iter()
        .map(|&yi| cfg.atol + cfg.rtol * yi.abs())
        .collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y.iter().zip(f0).map(|(yi, fi)| yi + h0 * fi).collect();
    let mut f1 = vec![0.0; n];
    frozen.rhs(t + h0, &y1, u_buf, &mut f1);
    stats.rhs_evals += 1;
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Reference solve with the adaptive pair, sampled on the grid.
pub fn solve_blackbox(
    sys: &dyn OdeSystem,
    p: &[f64],
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    solve_blackbox_with_stats(sys, p, grid, cfg).map(|(t, _)| t)
}

pub fn solve_blackbox_with_stats(
    sys: &dyn OdeSystem,
    p: &[f64],
    grid: TimeGrid,
    cfg: &SolverConfig,
) -> Result<(Trajectory, SolveStats)> {
    let frozen = FrozenSystem::new(sys, p)?;
    let (states, stats) = integrate_dense(&frozen, grid, cfg)?;
    let traj = Trajectory {
        states,
        grid,
        parameter: p.to_vec(),
        provenance: Provenance::Blackbox,
    };
    traj.validate()?;
    Ok((traj, stats))
}
