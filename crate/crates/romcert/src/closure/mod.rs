//! Data-driven closure for reduced models of adaptively integrated systems.
//!
//! A blackbox time integrator does not follow any fixed one-step scheme, so
//! its snapshots do not satisfy the residual of an imposed scheme. This
//! module learns that mismatch. The pipeline is:
//!
//! 1. extract the per-step defect of an imposed scheme from blackbox
//!    snapshots ([`compute_defect_trajectory`]),
//! 2. compress the defect trajectories collected over a parameter sample
//!    into a low-dimensional basis by a two-stage SVD ([`two_stage_svd`]),
//! 3. fit a surrogate (radial basis interpolation or a small feed-forward
//!    network) mapping (t, p) to the reduced coefficients,
//! 4. evaluate the closure at new parameters ([`ClosureModel`]), optionally
//!    replacing the prediction with the exact defect where it is known.

pub mod defect;
pub mod fnn;
pub mod rbf;
pub mod svd2;

pub use defect::{compute_defect_trajectory, defect_with_ops, DefectMatrixSource};
pub use fnn::{FnnHyper, FnnModel};
pub use rbf::RbfInterpolant;
pub use svd2::{two_stage_svd, DefectTensor, TwoStageSvd};

use crate::error::{Error, Result};
use crate::models::{OdeSystem, ParamDomain, TimeGrid, Trajectory};
use crate::timestepping::{solve_blackbox, ImexScheme, SolverConfig};
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Which surrogate family maps (t, p) to reduced defect coefficients.
#[derive(Debug, Clone)]
pub enum SurrogateKind {
    Rbf,
    Fnn(FnnHyper),
}

impl SurrogateKind {
    pub fn label(&self) -> &'static str {
        match self {
            SurrogateKind::Rbf => "rbf",
            SurrogateKind::Fnn(_) => "fnn",
        }
    }
}

/// Compress a defect tensor by the two-stage SVD and fit the chosen
/// surrogate to the reduced coefficients, yielding a ready closure model.
/// The SVD stages are returned alongside for reporting.
pub fn train_closure(
    tensor: &DefectTensor,
    domain: &ParamDomain,
    tol_t: f64,
    tol_p: f64,
    kind: &SurrogateKind,
) -> Result<(ClosureModel, TwoStageSvd)> {
    let stages = two_stage_svd(tensor, tol_t, tol_p)?;
    let surrogate = match kind {
        SurrogateKind::Rbf => {
            Surrogate::Rbf(RbfInterpolant::fit(&tensor.params, &stages.reduced, domain)?)
        }
        SurrogateKind::Fnn(hyper) => Surrogate::Fnn(FnnModel::train(
            &tensor.params,
            &stages.reduced,
            domain,
            &tensor.grid,
            hyper,
        )?),
    };
    let model = ClosureModel::new(stages.v_d.clone(), surrogate, tensor.grid, tensor.scheme)?;
    Ok((model, stages))
}

/// Either surrogate family, behind one evaluation interface. The boolean
/// returned by evaluation reports extrapolation outside the training hull;
/// the network variant has no hull notion and always reports false.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub enum Surrogate {
    Rbf(RbfInterpolant),
    Fnn(FnnModel),
}

impl Surrogate {
    pub fn n_outputs(&self) -> usize {
        match self {
            Surrogate::Rbf(r) => r.n_outputs(),
            Surrogate::Fnn(f) => f.n_outputs(),
        }
    }

    pub fn n_time(&self) -> usize {
        match self {
            Surrogate::Rbf(r) => r.n_time(),
            Surrogate::Fnn(f) => f.grid().n_points(),
        }
    }

    /// Reduced coefficients at grid index `k`.
    pub fn eval_step(&self, k: usize, p: &[f64], out: &mut [f64]) -> Result<bool> {
        match self {
            Surrogate::Rbf(r) => r.eval_into(k, p, out),
            Surrogate::Fnn(f) => f.eval_at_step(k, p, out).map(|_| false),
        }
    }

    /// Reduced coefficients at every grid index: n_outputs x N_t.
    pub fn eval_param(&self, p: &[f64]) -> Result<(DMatrix<f64>, bool)> {
        match self {
            Surrogate::Rbf(r) => r.eval_param(p),
            Surrogate::Fnn(f) => f.eval_param(p).map(|m| (m, false)),
        }
    }
}

fn param_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

/// Predicts the full-order defect matrix at a parameter: the surrogate
/// produces reduced coefficients which are lifted through the defect basis.
/// Parameters registered via [`ClosureModel::update`] bypass the surrogate
/// and return their stored (exact) defect instead. Overrides are runtime
/// training state and are not persisted when the model is serialized.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClosureModel {
    /// Defect basis, state_dim x n_modes, orthonormal columns.
    pub v_d: DMatrix<f64>,
    pub surrogate: Surrogate,
    pub grid: TimeGrid,
    pub scheme: ImexScheme,
    #[serde(skip)]
    overrides: BTreeMap<Vec<u64>, DMatrix<f64>>,
}

impl ClosureModel {
    pub fn new(
        v_d: DMatrix<f64>,
        surrogate: Surrogate,
        grid: TimeGrid,
        scheme: ImexScheme,
    ) -> Result<Self> {
        if v_d.ncols() != surrogate.n_outputs() {
            return Err(Error::DimensionMismatch {
                context: "closure basis columns vs surrogate outputs".into(),
                expected: v_d.ncols(),
                got: surrogate.n_outputs(),
            });
        }
        if surrogate.n_time() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "surrogate covers {} grid points, grid has {}",
                surrogate.n_time(),
                grid.n_points()
            )));
        }
        Ok(Self {
            v_d,
            surrogate,
            grid,
            scheme,
            overrides: BTreeMap::new(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.v_d.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.v_d.ncols()
    }

    /// Register the exact defect matrix for a parameter. Registering the
    /// same parameter again replaces the stored matrix, so the call is
    /// idempotent.
    pub fn update(&mut self, p: &[f64], defect: DMatrix<f64>) -> Result<()> {
        if defect.nrows() != self.state_dim() || defect.ncols() != self.grid.n_points() {
            return Err(Error::DimensionMismatch {
                context: "stored defect matrix".into(),
                expected: self.state_dim() * self.grid.n_points(),
                got: defect.nrows() * defect.ncols(),
            });
        }
        self.overrides.insert(param_key(p), defect);
        Ok(())
    }

    /// True when the parameter's defect is stored exactly (bitwise match).
    pub fn has_override(&self, p: &[f64]) -> bool {
        self.overrides.contains_key(&param_key(p))
    }

    pub fn n_overrides(&self) -> usize {
        self.overrides.len()
    }

    /// Defect column at grid index `k`, written into `out` (length
    /// state_dim). Index 0 is identically zero. Returns the extrapolation
    /// flag from the surrogate (false for stored parameters).
    pub fn eval_into(&self, k: usize, p: &[f64], out: &mut [f64]) -> Result<bool> {
        if out.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "closure output".into(),
                expected: self.state_dim(),
                got: out.len(),
            });
        }
        if k >= self.grid.n_points() {
            return Err(Error::InvalidArgument(format!(
                "grid index {k} outside 0..{}",
                self.grid.n_points()
            )));
        }
        if k == 0 {
            out.fill(0.0);
            return Ok(false);
        }
        if let Some(stored) = self.overrides.get(&param_key(p)) {
            for (o, v) in out.iter_mut().zip(stored.column(k).iter()) {
                *o = *v;
            }
            return Ok(false);
        }
        let mut coeff = vec![0.0; self.n_modes()];
        let flag = self.surrogate.eval_step(k, p, &mut coeff)?;
        out.fill(0.0);
        for (j, c) in coeff.iter().enumerate() {
            let col = self.v_d.column(j);
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += c * v;
            }
        }
        Ok(flag)
    }

    /// Full defect matrix (state_dim x N_t) at a parameter, materialized
    /// once so corrected marches and residual assembly can share it. Column
    /// 0 is zero.
    pub fn decode_param(&self, p: &[f64]) -> Result<(DMatrix<f64>, bool)> {
        if let Some(stored) = self.overrides.get(&param_key(p)) {
            return Ok((stored.clone(), false));
        }
        let (mut coeff, flag) = self.surrogate.eval_param(p)?;
        for j in 0..coeff.nrows() {
            coeff[(j, 0)] = 0.0;
        }
        Ok((&self.v_d * coeff, flag))
    }
}

/// Solve the full model with the blackbox integrator at each parameter and
/// extract the imposed-scheme defect, assembling the training tensor for the
/// closure. Returns the tensor together with the blackbox trajectories so
/// callers can reuse the snapshots.
pub fn build_defect_tensor(
    sys: &dyn OdeSystem,
    params: &[Vec<f64>],
    grid: &TimeGrid,
    scheme: ImexScheme,
    solver: &SolverConfig,
) -> Result<(DefectTensor, Vec<Trajectory>)> {
    if params.is_empty() {
        return Err(Error::InvalidArgument(
            "defect sampling needs at least one parameter".into(),
        ));
    }
    let mut slices = Vec::with_capacity(params.len());
    let mut trajectories = Vec::with_capacity(params.len());
    for p in params {
        let traj = solve_blackbox(sys, p, *grid, solver)?;
        slices.push(compute_defect_trajectory(sys, p, &traj, scheme)?);
        trajectories.push(traj);
    }
    let tensor = DefectTensor {
        slices,
        params: params.to_vec(),
        grid: *grid,
        scheme,
    };
    tensor.validate()?;
    Ok((tensor, trajectories))
}
