//! romcert: reduced-order models for parametric nonlinear ODE systems whose
//! full-order trajectories come from an adaptive black-box solver, with
//! residual-based output error estimation made consistent by a learned
//! closure (defect) term.
//!
//! The crate is organized around the offline/online split of the reduced
//! basis method:
//!
//! - [`models`]: parametric semi-discrete systems (heat, Burgers,
//!   FitzHugh-Nagumo) behind one trait, plus time grids and trajectories.
//! - [`timestepping`]: an adaptive Dormand-Prince 5(4) "black-box" solver
//!   with dense output, and first/second-order IMEX marches that accept
//!   per-step closure vectors.
//! - [`closure`]: defect trajectories of an imposed IMEX scheme evaluated on
//!   black-box snapshots, their two-stage SVD compression, and RBF / neural
//!   surrogates mapping (t, p) to reduced defect coefficients.
//! - [`estimator`]: corrected and auxiliary residuals, steady dual solves,
//!   and the per-step output error estimates with their constants.
//! - [`reduction`]: POD basis updates, Galerkin projection, DEIM
//!   hyperreduction, closure-corrected reduced solves, and the two greedy
//!   sampling loops.
//! - [`config`] / [`runner`]: the experiment configuration file format and
//!   the subcommand implementations behind the thin CLI.
//!
//! Every runnable capability has a corresponding example under `examples/`;
//! see the repository README for the catalog.

pub mod closure;
pub mod config;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod models;
pub mod reduction;
pub mod runner;
pub mod timestepping;

pub use error::{Error, Result};
