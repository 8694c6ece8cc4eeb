//! Galerkin projection and the corrected reduced-order model.
//!
//! A `Rom` wraps a full-order system together with a column-orthonormal
//! basis V and is itself an `OdeSystem` of dimension n: its operators are
//! A_hat(p) = V'A(p)V, B_hat = V'B, C_hat = CV and x0_hat = V'x0. The same
//! scheme march and adaptive solver that integrate full models therefore
//! integrate reduced ones; the closure enters a scheme march as a stored
//! per-step correction d_hat^k = V'd^k. When an interpolation operator for
//! the nonlinearity is attached, V'I[f] replaces V'f in every evaluation,
//! and f is only ever sampled at the interpolation rows.

use crate::error::{Error, Result};
use crate::linalg::{orthonormality_defect, Csr};
use crate::models::{OdeSystem, ParamDomain, TimeGrid, Trajectory};
use crate::reduction::DeimProjector;
use crate::timestepping::{solve_blackbox, ImexOps, ImexScheme, SolverConfig, StoredCorrections};
use nalgebra::DMatrix;

/// Galerkin reduced-order model over a fixed basis.
pub struct Rom<'a> {
    parent: &'a dyn OdeSystem,
    v: DMatrix<f64>,
    c_hat: DMatrix<f64>,
    deim: Option<DeimInterp>,
}

struct DeimInterp {
    projector: DeimProjector,
    /// V'U, lifting interpolation coefficients straight into reduced space.
    m_hat: DMatrix<f64>,
}

impl<'a> Rom<'a> {
    /// Projects `parent` onto the span of the column-orthonormal `v`.
    pub fn new(parent: &'a dyn OdeSystem, v: DMatrix<f64>) -> Result<Self> {
        if v.nrows() != parent.dim() {
            return Err(Error::DimensionMismatch {
                context: "basis rows".into(),
                expected: parent.dim(),
                got: v.nrows(),
            });
        }
        if v.ncols() == 0 || v.ncols() > v.nrows() {
            return Err(Error::InvalidArgument(format!(
                "basis with {} columns over {} rows",
                v.ncols(),
                v.nrows()
            )));
        }
        let defect = orthonormality_defect(&v);
        if defect > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "basis is not orthonormal: max Gram deviation {defect:.3e}"
            )));
        }
        let c_hat = parent.output_matrix() * &v;
        Ok(Self {
            parent,
            v,
            c_hat,
            deim: None,
        })
    }

    /// Attaches interpolation of the nonlinearity; subsequent marches and
    /// adaptive solves evaluate f at the interpolation rows only.
    pub fn with_deim(mut self, projector: DeimProjector) -> Result<Self> {
        if self.parent.is_linear() {
            return Err(Error::InvalidArgument(
                "interpolation of the nonlinearity needs a nonlinear system".into(),
            ));
        }
        if projector.u.nrows() != self.parent.dim() {
            return Err(Error::DimensionMismatch {
                context: "interpolation basis rows".into(),
                expected: self.parent.dim(),
                got: projector.u.nrows(),
            });
        }
        let m_hat = self.v.tr_mul(&projector.u);
        self.deim = Some(DeimInterp { projector, m_hat });
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn parent(&self) -> &dyn OdeSystem {
        self.parent
    }

    /// x = V x_hat for a whole reduced trajectory.
    pub fn lift(&self, reduced_states: &DMatrix<f64>) -> DMatrix<f64> {
        &self.v * reduced_states
    }

    /// d_hat = V'd, the reduced closure sequence.
    pub fn project_closure(&self, defect: &DMatrix<f64>) -> DMatrix<f64> {
        self.v.tr_mul(defect)
    }

    /// Outputs y_hat = C_hat x_hat of a reduced trajectory.
    pub fn outputs(&self, reduced_states: &DMatrix<f64>) -> DMatrix<f64> {
        &self.c_hat * reduced_states
    }

    /// Marches the corrected reduced model over the grid: the closure, given
    /// in full space, is projected and added to each step. `None` gives the
    /// plain reduced scheme march.
    pub fn solve_crom(
        &self,
        p: &[f64],
        grid: TimeGrid,
        scheme: ImexScheme,
        closure: Option<&DMatrix<f64>>,
    ) -> Result<Trajectory> {
        let ops = ImexOps::new(self, p, grid, scheme)?;
        match closure {
            None => ops.march(None),
            Some(d) => {
                if d.nrows() != self.parent.dim() || d.ncols() != grid.n_points() {
                    return Err(Error::DimensionMismatch {
                        context: "closure matrix".into(),
                        expected: self.parent.dim() * grid.n_points(),
                        got: d.nrows() * d.ncols(),
                    });
                }
                let d_hat = self.project_closure(d);
                let steps = d_hat.columns(1, d_hat.ncols() - 1).into_owned();
                ops.march(Some(&StoredCorrections(&steps)))
            }
        }
    }

    /// Integrates the (uncorrected) reduced model with the adaptive solver.
    pub fn solve_adaptive(
        &self,
        p: &[f64],
        grid: TimeGrid,
        cfg: &SolverConfig,
    ) -> Result<Trajectory> {
        solve_blackbox(self, p, grid, cfg)
    }
}

impl OdeSystem for Rom<'_> {
    fn name(&self) -> &'static str {
        "galerkin-rom"
    }

    fn dim(&self) -> usize {
        self.v.ncols()
    }

    fn n_inputs(&self) -> usize {
        self.parent.n_inputs()
    }

    fn n_outputs(&self) -> usize {
        self.parent.n_outputs()
    }

    fn param_domain(&self) -> &ParamDomain {
        self.parent.param_domain()
    }

    fn a_matrix(&self, p: &[f64]) -> Result<Csr> {
        let a = self.parent.a_matrix(p)?;
        let a_hat = self.v.tr_mul(&a.mul_dense(&self.v));
        let n = a_hat.nrows();
        // All entries enter the pattern so that it cannot drift with p.
        let mut triplets = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                triplets.push((i, j, a_hat[(i, j)]));
            }
        }
        Csr::from_triplets(n, n, &triplets)
    }

    fn input_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.v.tr_mul(&self.parent.input_matrix(p)?))
    }

    fn output_matrix(&self) -> DMatrix<f64> {
        self.c_hat.clone()
    }

    fn initial_state(&self, p: &[f64]) -> Result<Vec<f64>> {
        let x0 = self.parent.initial_state(p)?;
        let n = self.n();
        let mut out = vec![0.0; n];
        for j in 0..n {
            out[j] = self.v.column(j).iter().zip(&x0).map(|(v, x)| v * x).sum();
        }
        Ok(out)
    }

    fn input_signal(&self, t: f64, u: &mut [f64]) {
        self.parent.input_signal(t, u);
    }

    fn is_linear(&self) -> bool {
        self.parent.is_linear()
    }

    fn nonlinear(&self, p: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.n();
        match &self.deim {
            Some(interp) => {
                // Sample the needed full-state entries lazily; only the
                // stencils of the interpolation rows are ever touched.
                let lift_entry = |i: usize| -> f64 {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += self.v[(i, j)] * x[j];
                    }
                    s
                };
                let rows = &interp.projector.indices;
                let mut f_rows = vec![0.0; rows.len()];
                self.parent.nonlinear_rows(p, rows, &lift_entry, &mut f_rows);
                let coeffs = interp
                    .projector
                    .coefficients(&f_rows)
                    .expect("row count fixed at construction");
                let lifted = &interp.m_hat * coeffs;
                out.copy_from_slice(lifted.as_slice());
            }
            None => {
                let x_full = &self.v * DMatrix::from_column_slice(n, 1, x);
                let mut f_full = vec![0.0; self.parent.dim()];
                self.parent.nonlinear(p, x_full.as_slice(), &mut f_full);
                for j in 0..n {
                    out[j] = self.v.column(j).iter().zip(&f_full).map(|(v, f)| v * f).sum();
                }
            }
        }
    }

    fn nonlinear_stencil(&self, _row: usize) -> Vec<usize> {
        // Projection couples every reduced row to every reduced entry.
        (0..self.n()).collect()
    }

    fn nonlinear_rows(&self, p: &[f64], rows: &[usize], x: &dyn Fn(usize) -> f64, out: &mut [f64]) {
        let n = self.n();
        let x_hat: Vec<f64> = (0..n).map(|j| x(j)).collect();
        let mut full = vec![0.0; n];
        self.nonlinear(p, &x_hat, &mut full);
        for (o, &r) in out.iter_mut().zip(rows) {
            *o = full[r];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::defect_with_ops;
    use crate::linalg::svd_sorted;
    use crate::models::{assemble, ModelId};
    use crate::timestepping::solve_blackbox;

    fn pod_basis(states: &DMatrix<f64>, n_modes: usize) -> DMatrix<f64> {
        let (u, _, _) = svd_sorted(states).unwrap();
        DMatrix::from(u.columns(0, n_modes.min(u.ncols())))
    }

    #[test]
    fn identity_basis_reproduces_the_full_model() {
        let p = [0.06];
        let sys = assemble(ModelId::Heat, &p, 24).unwrap();
        let n = sys.dim();
        let grid = TimeGrid::new(0.0, 0.01, 30).unwrap();
        let rom = Rom::new(sys.as_ref(), DMatrix::identity(n, n)).unwrap();

        let full = ImexOps::new(sys.as_ref(), &p, grid, ImexScheme::Order2)
            .unwrap()
            .march(None)
            .unwrap();
        let reduced = rom.solve_crom(&p, grid, ImexScheme::Order2, None).unwrap();
        let scale = full.states.norm();
        assert!((&full.states - &reduced.states).norm() <= 1e-10 * scale);

        // With the exact defect, the corrected march over the identity basis
        // recovers the adaptive solution itself.
        let traj = solve_blackbox(sys.as_ref(), &p, grid, &SolverConfig::default()).unwrap();
        let ops = ImexOps::new(sys.as_ref(), &p, grid, ImexScheme::Order2).unwrap();
        let d = defect_with_ops(&ops, &traj).unwrap();
        let corrected = rom.solve_crom(&p, grid, ImexScheme::Order2, Some(&d)).unwrap();
        assert!((&corrected.states - &traj.states).norm() <= 1e-10 * scale);
    }

    #[test]
    fn projected_operators_keep_structure() {
        let p = [0.05];
        let sys = assemble(ModelId::Heat, &p, 32).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 20).unwrap();
        let traj = solve_blackbox(sys.as_ref(), &p, grid, &SolverConfig::default()).unwrap();
        let v = pod_basis(&traj.states, 5);
        let rom = Rom::new(sys.as_ref(), v.clone()).unwrap();

        // A symmetric full operator projects to a symmetric reduced one.
        let a_hat = rom.a_matrix(&p).unwrap().to_dense();
        assert_eq!(a_hat.nrows(), 5);
        assert!((&a_hat - a_hat.transpose()).norm() <= 1e-12 * a_hat.norm());

        // The reduced closure is the projected full closure, entry by entry.
        let ops = ImexOps::new(sys.as_ref(), &p, grid, ImexScheme::Order1).unwrap();
        let d = defect_with_ops(&ops, &traj).unwrap();
        let d_hat = rom.project_closure(&d);
        for k in 0..grid.n_points() {
            for j in 0..5 {
                let oracle: f64 = v.column(j).iter().zip(d.column(k).iter()).map(|(a, b)| a * b).sum();
                assert!((d_hat[(j, k)] - oracle).abs() <= 1e-12 * oracle.abs().max(1.0));
            }
        }

        // Basis validation rejects non-orthonormal inputs.
        let skewed = &v * 2.0;
        assert!(Rom::new(sys.as_ref(), skewed).is_err());
    }

    #[test]
    fn adaptive_rom_integration_matches_the_full_model_at_full_rank() {
        let p = [0.06];
        let sys = assemble(ModelId::Heat, &p, 16).unwrap();
        let n = sys.dim();
        let grid = TimeGrid::new(0.0, 0.02, 20).unwrap();
        let rom = Rom::new(sys.as_ref(), DMatrix::identity(n, n)).unwrap();
        let cfg = SolverConfig::default();
        let full = solve_blackbox(sys.as_ref(), &p, grid, &cfg).unwrap();
        let reduced = rom.solve_adaptive(&p, grid, &cfg).unwrap();
        let c = sys.output_matrix();
        let y_full = &c * &full.states;
        let y_red = rom.outputs(&reduced.states);
        assert!((&y_full - &y_red).norm() <= 1e-6 * y_full.norm().max(1e-300));
    }

    #[test]
    fn full_rank_interpolation_matches_the_plain_reduced_march() {
        let p = [0.15];
        let sys = assemble(ModelId::Burgers, &p, 40).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 30).unwrap();
        let traj = solve_blackbox(sys.as_ref(), &p, grid, &SolverConfig::default()).unwrap();
        let v = pod_basis(&traj.states, 6);

        let plain = Rom::new(sys.as_ref(), v.clone()).unwrap();
        let base = plain.solve_crom(&p, grid, ImexScheme::Order1, None).unwrap();
        let y_base = plain.outputs(&base.states);

        // Nonlinearity snapshots along the plain reduced march, interpolated
        // at full numerical rank.
        let lifted = plain.lift(&base.states);
        let n_full = sys.dim();
        let mut f_snaps = DMatrix::zeros(n_full, grid.n_points());
        let mut f = vec![0.0; n_full];
        for k in 0..grid.n_points() {
            let col: Vec<f64> = lifted.column(k).iter().copied().collect();
            sys.nonlinear(&p, &col, &mut f);
            for i in 0..n_full {
                f_snaps[(i, k)] = f[i];
            }
        }
        let deim = DeimProjector::build(&f_snaps, grid.n_points()).unwrap();
        let hyper = Rom::new(sys.as_ref(), v).unwrap().with_deim(deim).unwrap();
        let reduced = hyper.solve_crom(&p, grid, ImexScheme::Order1, None).unwrap();
        let y_hyper = hyper.outputs(&reduced.states);
        assert!(
            (&y_base - &y_hyper).norm() <= 1e-6 * y_base.norm().max(1e-300),
            "full-rank interpolation must reproduce the un-hyperreduced outputs"
        );
    }

    #[test]
    fn shape_and_basis_errors_are_reported() {
        let sys = assemble(ModelId::Heat, &[0.06], 16).unwrap();
        let n = sys.dim();
        assert!(Rom::new(sys.as_ref(), DMatrix::identity(n + 1, 2)).is_err());
        assert!(Rom::new(sys.as_ref(), DMatrix::zeros(n, 0)).is_err());

        let rom = Rom::new(sys.as_ref(), DMatrix::identity(n, 3)).unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 5).unwrap();
        let wrong = DMatrix::zeros(n, 3);
        assert!(rom
            .solve_crom(&[0.06], grid, ImexScheme::Order1, Some(&wrong))
            .is_err());
    }
}
