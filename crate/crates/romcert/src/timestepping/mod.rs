//! Time integration: an adaptive embedded Runge-Kutta 5(4) reference solver
//! with dense output, plus first- and second-order IMEX marches whose
//! operator coefficients are shared with the defect and residual machinery.

mod dopri;
mod imex;

pub use dopri::{
    integrate_dense, solve_blackbox, solve_blackbox_with_stats, SolveStats, SolverConfig,
};
pub use imex::{solve_imex, ClosureSource, ImexOps, ImexScheme, StoredCorrections};
