//! Greedy parameter sampling for reduced-basis construction.
//!
//! Two drivers share the POD/Galerkin machinery but differ in how they
//! certify candidates. [`pod_greedy_standard`] enriches from trajectory
//! snapshots and scores each parameter with a closure-free residual of the
//! imposed scheme: consistent when the snapshots follow that same scheme,
//! but stuck at the scheme-mismatch floor when an adaptive integrator
//! produced them. [`pod_greedy_ode`] trains a defect closure first, marches
//! the corrected reduced model, and scores candidates with the calibrated
//! two-term output estimate, which keeps the selection meaningful for
//! blackbox-integrated systems.
//!
//! Both drivers are deterministic for a fixed input: sweeps run in input
//! order, the selection argmax breaks ties toward the lower index, already
//! selected parameters never re-enter the argmax, and the iteration cap
//! yields a non-converged result rather than an error.

use crate::closure::{
    build_defect_tensor, compute_defect_trajectory, train_closure, ClosureModel, SurrogateKind,
};
use crate::error::{Error, Result};
use crate::estimator::{
    auxiliary_residual, column_norms, output_error_estimate, residual_corrected, rho_bar,
    scheme_residual, solve_dual, stability_constants, EstimatorVariant,
};
use crate::linalg::PowerIterOpts;
use crate::models::{OdeSystem, TimeGrid, Trajectory};
use crate::reduction::{DeimProjector, ReducedBasis, Rom};
use crate::timestepping::{solve_blackbox, ImexOps, ImexScheme, SolverConfig};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Where trajectories come from while the greedy loop runs.
#[derive(Debug, Clone)]
pub enum TrajectorySource {
    /// Adaptive blackbox integration, the setting the closure exists for.
    Blackbox(SolverConfig),
    /// March with the imposed scheme itself: the matched baseline in which
    /// the closure-free residual is consistent.
    SchemeMarch,
}

/// One enrichment round: which parameter was added, the worst estimate over
/// the training set after adding it, and the basis size reached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreedyIteration {
    pub param: Vec<f64>,
    pub epsilon: f64,
    pub basis_size: usize,
    pub wall_secs: f64,
}

/// Outcome of a greedy run. The epsilon sequence is recorded verbatim, one
/// entry per enrichment, with no smoothing.
pub struct GreedyResult {
    pub basis: DMatrix<f64>,
    pub history: Vec<GreedyIteration>,
    pub converged: bool,
    /// Trained defect closure; present for the closure-aware driver only.
    pub closure: Option<ClosureModel>,
    /// Residual-ratio calibration of the last sweep; the closure-free
    /// driver implicitly uses 1.
    pub rho_bar: Option<f64>,
}

impl GreedyResult {
    pub fn n(&self) -> usize {
        self.basis.ncols()
    }

    pub fn final_epsilon(&self) -> f64 {
        self.history.last().map(|h| h.epsilon).unwrap_or(f64::INFINITY)
    }
}

/// Settings for the closure-free driver.
#[derive(Debug, Clone)]
pub struct StandardGreedyOpts {
    pub tol: f64,
    pub r_c: usize,
    pub scheme: ImexScheme,
    pub grid: TimeGrid,
    pub source: TrajectorySource,
    pub max_iters: usize,
    pub power: PowerIterOpts,
}

impl StandardGreedyOpts {
    pub fn new(tol: f64, r_c: usize, scheme: ImexScheme, grid: TimeGrid, source: TrajectorySource) -> Self {
        Self {
            tol,
            r_c,
            scheme,
            grid,
            source,
            max_iters: 30,
            power: PowerIterOpts::default(),
        }
    }
}

/// Settings for the closure-aware driver.
#[derive(Debug, Clone)]
pub struct OdeGreedyOpts {
    pub tol: f64,
    pub r_c: usize,
    pub scheme: ImexScheme,
    pub grid: TimeGrid,
    /// Blackbox solver producing every snapshot trajectory.
    pub solver: SolverConfig,
    /// Relative energy tolerance of the per-parameter (first-stage) SVD.
    pub tol_svd_t: f64,
    /// Relative energy tolerance of the stacked (second-stage) SVD.
    pub tol_svd_p: f64,
    pub surrogate: SurrogateKind,
    /// Replace the surrogate by the exact defect at every selected
    /// parameter as it becomes available.
    pub update_defect: bool,
    pub max_iters: usize,
    pub power: PowerIterOpts,
}

impl OdeGreedyOpts {
    pub fn new(tol: f64, r_c: usize, scheme: ImexScheme, grid: TimeGrid) -> Self {
        Self {
            tol,
            r_c,
            scheme,
            grid,
            solver: SolverConfig::default(),
            tol_svd_t: 1e-8,
            tol_svd_p: 1e-8,
            surrogate: SurrogateKind::Rbf,
            update_defect: false,
            max_iters: 30,
            power: PowerIterOpts::default(),
        }
    }
}

/// Per-parameter quantities that do not change while the basis grows: the
/// implicit-operator norm and the (full) dual solution of the output
/// functional.
struct ParamCache {
    zeta: f64,
    r_du_norm: f64,
    x_du_norm: f64,
    x_du: DMatrix<f64>,
}

fn build_caches(
    sys: &dyn OdeSystem,
    xi: &[Vec<f64>],
    grid: TimeGrid,
    scheme: ImexScheme,
    power: PowerIterOpts,
) -> Result<Vec<ParamCache>> {
    xi.iter()
        .map(|p| {
            let ops = ImexOps::new(sys, p, grid, scheme)?;
            let constants = stability_constants(&ops, 0.0, power)?;
            let dual = solve_dual(&ops, None)?;
            Ok(ParamCache {
                zeta: constants.zeta,
                r_du_norm: dual.r_du_norm(),
                x_du_norm: dual.x_du_norm(),
                x_du: dual.x_du,
            })
        })
        .collect()
}

fn validate_training_set(sys: &dyn OdeSystem, xi: &[Vec<f64>], tol: f64, r_c: usize) -> Result<()> {
    if xi.is_empty() {
        return Err(Error::InvalidArgument(
            "greedy sampling needs a nonempty training set".into(),
        ));
    }
    for p in xi {
        sys.param_domain().validate(p)?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "greedy tolerance must be positive, got {tol}"
        )));
    }
    if r_c == 0 {
        return Err(Error::InvalidArgument(
            "greedy enrichment needs r_c >= 1".into(),
        ));
    }
    Ok(())
}

/// Largest entry and the argmax restricted to unselected candidates,
/// breaking ties toward the lower index.
fn next_candidate(estimates: &[f64], selected: &[bool]) -> (f64, Option<usize>) {
    let mut eps = 0.0f64;
    for &e in estimates {
        eps = eps.max(e);
    }
    let mut best: Option<usize> = None;
    for (j, &e) in estimates.iter().enumerate() {
        if selected[j] {
            continue;
        }
        if best.map_or(true, |b| e > estimates[b]) {
            best = Some(j);
        }
    }
    (eps, best)
}

fn check_finite(epsilon: f64, context: &str) -> Result<()> {
    if epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::IntegrationFailure {
            t_last: f64::NAN,
            reason: format!("{context} produced a non-finite error estimate"),
        })
    }
}

/// Greedy sampling with snapshot POD and the closure-free residual
/// estimate. Each round enriches the basis from the trajectory at the
/// current parameter, then scores every training parameter by the reduced
/// solution's scheme residual through the dual-weighted output estimate.
/// Snapshots and reduced trajectories both follow `opts.source`.
pub fn pod_greedy_standard(
    sys: &dyn OdeSystem,
    xi: &[Vec<f64>],
    opts: &StandardGreedyOpts,
) -> Result<GreedyResult> {
    validate_training_set(sys, xi, opts.tol, opts.r_c)?;
    let grid = opts.grid;
    let caches = build_caches(sys, xi, grid, opts.scheme, opts.power)?;

    let mut basis = ReducedBasis::empty(sys.dim());
    let mut snapshots: Vec<Option<Trajectory>> = (0..xi.len()).map(|_| None).collect();
    let mut selected = vec![false; xi.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut current = 0usize;

    for _ in 0..opts.max_iters {
        let started = Instant::now();
        if snapshots[current].is_none() {
            let traj = match &opts.source {
                TrajectorySource::Blackbox(cfg) => solve_blackbox(sys, &xi[current], grid, cfg)?,
                TrajectorySource::SchemeMarch => {
                    ImexOps::new(sys, &xi[current], grid, opts.scheme)?.march(None)?
                }
            };
            snapshots[current] = Some(traj);
        }
        basis.pod_update(&snapshots[current].as_ref().unwrap().states, opts.r_c)?;
        selected[current] = true;

        let rom = Rom::new(sys, basis.basis().clone())?;
        let mut estimates = vec![0.0; xi.len()];
        for (j, p) in xi.iter().enumerate() {
            let reduced = match &opts.source {
                TrajectorySource::Blackbox(cfg) => rom.solve_adaptive(p, grid, cfg)?,
                TrajectorySource::SchemeMarch => rom.solve_crom(p, grid, opts.scheme, None)?,
            };
            let lifted = rom.lift(&reduced.states);
            let ops = ImexOps::new(sys, p, grid, opts.scheme)?;
            let r = scheme_residual(&ops, &lifted, &lifted, None)?;
            let r_norms = column_norms(&r);
            let gap = column_norms(&caches[j].x_du.tr_mul(&r));
            let est = output_error_estimate(
                EstimatorVariant::A,
                &r_norms,
                caches[j].r_du_norm,
                caches[j].zeta,
                caches[j].x_du_norm,
                1.0,
                Some(&gap),
            )?;
            estimates[j] = est.mean;
        }

        let (epsilon, next) = next_candidate(&estimates, &selected);
        check_finite(epsilon, "closure-free sweep")?;
        history.push(GreedyIteration {
            param: xi[current].clone(),
            epsilon,
            basis_size: basis.n(),
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if epsilon <= opts.tol {
            converged = true;
            break;
        }
        match next {
            Some(j) => current = j,
            None => break,
        }
    }

    Ok(GreedyResult {
        basis: basis.into_basis(),
        history,
        converged,
        closure: None,
        rho_bar: None,
    })
}

/// Greedy sampling for adaptively integrated systems: pre-trains the defect
/// closure on `xi_defect` (indices into `xi`), then alternates snapshot
/// enrichment at the worst parameter with a sweep of the calibrated
/// two-term output estimate over the corrected reduced model. Nonlinear
/// systems additionally grow an interpolation basis for the nonlinearity by
/// `r_c` modes per round. The first element of `xi` seeds the loop, so
/// callers control the start through the ordering of the training set.
pub fn pod_greedy_ode(
    sys: &dyn OdeSystem,
    xi: &[Vec<f64>],
    xi_defect: &[usize],
    opts: &OdeGreedyOpts,
) -> Result<GreedyResult> {
    validate_training_set(sys, xi, opts.tol, opts.r_c)?;
    if xi_defect.is_empty() {
        return Err(Error::InvalidArgument(
            "closure training needs a nonempty parameter subset".into(),
        ));
    }
    let mut seen = vec![false; xi.len()];
    for &i in xi_defect {
        if i >= xi.len() {
            return Err(Error::InvalidArgument(format!(
                "closure-sample index {i} outside the training set of {}",
                xi.len()
            )));
        }
        if seen[i] {
            return Err(Error::InvalidArgument(format!(
                "closure-sample index {i} listed twice"
            )));
        }
        seen[i] = true;
    }

    let grid = opts.grid;
    let n_full = sys.dim();
    let nonlinear = !sys.is_linear();

    // Closure pre-training: blackbox snapshots and exact defects on the
    // sample subset, compressed and fitted.
    let defect_params: Vec<Vec<f64>> = xi_defect.iter().map(|&i| xi[i].clone()).collect();
    let (tensor, trajs) = build_defect_tensor(sys, &defect_params, &grid, opts.scheme, &opts.solver)?;
    let (mut closure, _stages) = train_closure(
        &tensor,
        sys.param_domain(),
        opts.tol_svd_t,
        opts.tol_svd_p,
        &opts.surrogate,
    )?;

    let mut snapshots: Vec<Option<Trajectory>> = (0..xi.len()).map(|_| None).collect();
    let mut exact_defects: Vec<Option<DMatrix<f64>>> = vec![None; xi.len()];
    for ((&i, traj), slice) in xi_defect.iter().zip(trajs).zip(tensor.slices) {
        snapshots[i] = Some(traj);
        exact_defects[i] = Some(slice);
    }

    let caches = build_caches(sys, xi, grid, opts.scheme, opts.power)?;

    let mut basis = ReducedBasis::empty(n_full);
    let mut f_snapshots = DMatrix::<f64>::zeros(n_full, 0);
    let mut interp_modes = 0usize;
    let mut selected = vec![false; xi.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut current = 0usize;
    let mut last_rho = None;

    for _ in 0..opts.max_iters {
        let started = Instant::now();

        // Snapshots and the exact defect at the current parameter.
        if snapshots[current].is_none() {
            let traj = solve_blackbox(sys, &xi[current], grid, &opts.solver)?;
            exact_defects[current] =
                Some(compute_defect_trajectory(sys, &xi[current], &traj, opts.scheme)?);
            snapshots[current] = Some(traj);
        }
        if opts.update_defect {
            closure.update(&xi[current], exact_defects[current].clone().unwrap())?;
        }

        basis.pod_update(&snapshots[current].as_ref().unwrap().states, opts.r_c)?;
        selected[current] = true;

        // Grow the nonlinearity snapshots and the interpolation rank.
        let rom = Rom::new(sys, basis.basis().clone())?;
        let rom = if nonlinear {
            let states = &snapshots[current].as_ref().unwrap().states;
            let old = f_snapshots.ncols();
            let mut grown = DMatrix::zeros(n_full, old + states.ncols());
            grown.columns_mut(0, old).copy_from(&f_snapshots);
            let mut f = vec![0.0; n_full];
            for k in 0..states.ncols() {
                let col: Vec<f64> = states.column(k).iter().copied().collect();
                sys.nonlinear(&xi[current], &col, &mut f);
                for i in 0..n_full {
                    grown[(i, old + k)] = f[i];
                }
            }
            f_snapshots = grown;
            interp_modes += opts.r_c;
            rom.with_deim(DeimProjector::build(&f_snapshots, interp_modes)?)?
        } else {
            rom
        };

        // Corrected-model sweep: residual norms everywhere, the residual
        // ratio calibrated at the current parameter only.
        let mut r_norms_all: Vec<Vec<f64>> = Vec::with_capacity(xi.len());
        let mut aux_norms_current: Option<Vec<f64>> = None;
        for (j, p) in xi.iter().enumerate() {
            let (d_tilde, _) = closure.decode_param(p)?;
            let reduced = rom.solve_crom(p, grid, opts.scheme, Some(&d_tilde))?;
            let lifted = rom.lift(&reduced.states);
            let ops = ImexOps::new(sys, p, grid, opts.scheme)?;
            let r = residual_corrected(&ops, &lifted, &d_tilde)?;
            r_norms_all.push(column_norms(&r));
            if j == current {
                let fom_states = &snapshots[current].as_ref().unwrap().states;
                let aux = auxiliary_residual(&ops, fom_states, &lifted, &d_tilde)?;
                aux_norms_current = Some(column_norms(&aux));
            }
        }
        let rho = rho_bar(&r_norms_all[current], aux_norms_current.as_ref().unwrap())?;
        last_rho = Some(rho);

        let mut estimates = vec![0.0; xi.len()];
        for j in 0..xi.len() {
            let est = output_error_estimate(
                EstimatorVariant::B,
                &r_norms_all[j],
                caches[j].r_du_norm,
                caches[j].zeta,
                caches[j].x_du_norm,
                rho,
                None,
            )?;
            estimates[j] = est.mean;
        }

        let (epsilon, next) = next_candidate(&estimates, &selected);
        check_finite(epsilon, "corrected-model sweep")?;
        history.push(GreedyIteration {
            param: xi[current].clone(),
            epsilon,
            basis_size: basis.n(),
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if epsilon <= opts.tol {
            converged = true;
            break;
        }
        match next {
            Some(j) => current = j,
            None => break,
        }
    }

    Ok(GreedyResult {
        basis: basis.into_basis(),
        history,
        converged,
        closure: Some(closure),
        rho_bar: last_rho,
    })
}

/// Shuffle the parameter list with a seeded generator and split it into
/// training and test sets. The training share is rounded and, for lists of
/// at least two parameters, clamped so that neither side is empty.
pub fn seeded_split(
    params: &[Vec<f64>],
    train_fraction: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut shuffled: Vec<Vec<f64>> = params.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    if shuffled.len() < 2 {
        return (shuffled, Vec::new());
    }
    let raw = (shuffled.len() as f64 * train_fraction).round() as usize;
    let n_train = raw.clamp(1, shuffled.len() - 1);
    let test = shuffled.split_off(n_train);
    (shuffled, test)
}

/// Evenly strided indices into `xi` covering its sorted order, endpoints
/// included: the closure training subset. Indices refer to the original
/// (unsorted) positions.
pub fn strided_defect_indices(xi: &[Vec<f64>], count: usize) -> Result<Vec<usize>> {
    if count == 0 || count > xi.len() {
        return Err(Error::InvalidArgument(format!(
            "closure sample count {count} for a training set of {}",
            xi.len()
        )));
    }
    let mut order: Vec<usize> = (0..xi.len()).collect();
    order.sort_by(|&a, &b| {
        xi[a].partial_cmp(&xi[b]).unwrap_or(std::cmp::Ordering::Equal)
    });
    if count == xi.len() {
        let mut all = order;
        all.sort_unstable();
        return Ok(all);
    }
    let mut picked = Vec::with_capacity(count);
    if count == 1 {
        picked.push(order[xi.len() / 2]);
    } else {
        for i in 0..count {
            let pos = (i as f64 * (xi.len() - 1) as f64 / (count - 1) as f64).round() as usize;
            picked.push(order[pos]);
        }
    }
    picked.sort_unstable();
    picked.dedup();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{assemble, ModelId};

    fn heat_params(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![0.02 + 0.07 * i as f64 / (n - 1).max(1) as f64])
            .collect()
    }

    #[test]
    fn matched_scheme_baseline_converges_on_heat() {
        let sys = assemble(ModelId::Heat, &[0.05], 32).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 60).unwrap();
        let xi = heat_params(6);
        let opts = StandardGreedyOpts::new(
            1e-9,
            2,
            ImexScheme::Order1,
            grid,
            TrajectorySource::SchemeMarch,
        );
        let result = pod_greedy_standard(sys.as_ref(), &xi, &opts).unwrap();
        assert!(result.converged, "history: {:?}", result.history);
        assert!(result.final_epsilon() <= 1e-9);
        assert!(crate::linalg::orthonormality_defect(&result.basis) <= 1e-12);

        // No parameter is enriched twice.
        let mut seen: Vec<&Vec<f64>> = Vec::new();
        for it in &result.history {
            assert!(!seen.contains(&&it.param));
            seen.push(&it.param);
        }
    }

    #[test]
    fn single_candidate_terminates_after_one_enrichment() {
        let sys = assemble(ModelId::Heat, &[0.05], 32).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 40).unwrap();
        let xi = vec![vec![0.05]];
        let opts = StandardGreedyOpts::new(
            1e-8,
            10,
            ImexScheme::Order1,
            grid,
            TrajectorySource::SchemeMarch,
        );
        let result = pod_greedy_standard(sys.as_ref(), &xi, &opts).unwrap();
        assert!(result.converged);
        assert_eq!(result.history.len(), 1);
    }

    #[test]
    fn blackbox_snapshots_leave_a_residual_floor() {
        let sys = assemble(ModelId::Burgers, &[0.1], 48).unwrap();
        let grid = TimeGrid::new(0.0, 0.02, 50).unwrap();
        let xi = vec![vec![0.05], vec![0.15], vec![0.4], vec![0.8]];
        let mut opts = StandardGreedyOpts::new(
            1e-12,
            2,
            ImexScheme::Order1,
            grid,
            TrajectorySource::Blackbox(SolverConfig::default()),
        );
        opts.max_iters = 3;
        let result = pod_greedy_standard(sys.as_ref(), &xi, &opts).unwrap();
        assert!(!result.converged);
        assert_eq!(result.history.len(), 3);
        for it in &result.history {
            assert!(it.epsilon > 1e-12);
        }

        // Identical inputs reproduce the identical selection history.
        let again = pod_greedy_standard(sys.as_ref(), &xi, &opts).unwrap();
        for (a, b) in result.history.iter().zip(&again.history) {
            assert_eq!(a.param, b.param);
            assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
        }
    }

    #[test]
    fn corrected_model_greedy_converges_on_heat() {
        let sys = assemble(ModelId::Heat, &[0.05], 32).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 50).unwrap();
        let xi = heat_params(8);
        let defect_idx = strided_defect_indices(&xi, 4).unwrap();
        let mut opts = OdeGreedyOpts::new(1e-3, 2, ImexScheme::Order1, grid);
        opts.max_iters = 8;
        let result = pod_greedy_ode(sys.as_ref(), &xi, &defect_idx, &opts).unwrap();
        assert!(result.converged, "history: {:?}", result.history);
        assert!(result.closure.is_some());
        assert!(crate::linalg::orthonormality_defect(&result.basis) <= 1e-12);
        let first = result.history.first().unwrap().epsilon;
        let last = result.final_epsilon();
        assert!(last <= first);
    }

    #[test]
    fn exact_defect_updates_are_registered_per_iteration() {
        let sys = assemble(ModelId::Heat, &[0.05], 24).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 40).unwrap();
        let xi = heat_params(6);
        let defect_idx = strided_defect_indices(&xi, 3).unwrap();
        let mut opts = OdeGreedyOpts::new(1e-12, 1, ImexScheme::Order1, grid);
        opts.max_iters = 3;

        opts.update_defect = true;
        let with = pod_greedy_ode(sys.as_ref(), &xi, &defect_idx, &opts).unwrap();
        assert_eq!(
            with.closure.as_ref().unwrap().n_overrides(),
            with.history.len()
        );

        opts.update_defect = false;
        let without = pod_greedy_ode(sys.as_ref(), &xi, &defect_idx, &opts).unwrap();
        assert_eq!(without.closure.as_ref().unwrap().n_overrides(), 0);
    }

    #[test]
    fn invalid_greedy_inputs_are_rejected() {
        let sys = assemble(ModelId::Heat, &[0.05], 24).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 20).unwrap();
        let xi = heat_params(4);
        let std_opts = StandardGreedyOpts::new(
            1e-6,
            1,
            ImexScheme::Order1,
            grid,
            TrajectorySource::SchemeMarch,
        );
        assert!(pod_greedy_standard(sys.as_ref(), &[], &std_opts).is_err());
        assert!(pod_greedy_standard(sys.as_ref(), &[vec![99.0]], &std_opts).is_err());

        let opts = OdeGreedyOpts::new(1e-6, 1, ImexScheme::Order1, grid);
        assert!(pod_greedy_ode(sys.as_ref(), &xi, &[], &opts).is_err());
        assert!(pod_greedy_ode(sys.as_ref(), &xi, &[9], &opts).is_err());
        assert!(pod_greedy_ode(sys.as_ref(), &xi, &[1, 1, 2], &opts).is_err());
    }

    #[test]
    fn split_and_stride_are_deterministic_and_well_formed() {
        let params: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let (train_a, test_a) = seeded_split(&params, 0.8, 7);
        let (train_b, test_b) = seeded_split(&params, 0.8, 7);
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(train_a.len(), 8);
        assert_eq!(test_a.len(), 2);
        let mut all: Vec<Vec<f64>> = train_a.iter().chain(&test_a).cloned().collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, params);

        // A different seed gives a different shuffle of the same elements.
        let (train_c, _) = seeded_split(&params, 0.8, 8);
        assert_ne!(train_a, train_c);

        let idx = strided_defect_indices(&train_a, 4).unwrap();
        assert_eq!(idx.len(), 4);
        let sorted_vals: Vec<f64> = {
            let mut v: Vec<f64> = train_a.iter().map(|p| p[0]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        // Endpoints of the sorted training set are always sampled.
        assert!(idx.iter().any(|&i| train_a[i][0] == sorted_vals[0]));
        assert!(idx
            .iter()
            .any(|&i| train_a[i][0] == *sorted_vals.last().unwrap()));

        assert!(strided_defect_indices(&train_a, 0).is_err());
        assert!(strided_defect_indices(&train_a, 99).is_err());
    }
}
