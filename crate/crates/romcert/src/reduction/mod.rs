//! Reduced-basis construction: POD updates, Galerkin projection, discrete
//! empirical interpolation, the closure-corrected reduced march, and the two
//! greedy sampling drivers.

pub mod deim;
pub mod galerkin;
pub mod greedy;
pub mod pod;

pub use deim::DeimProjector;
pub use galerkin::Rom;
pub use greedy::{
    pod_greedy_ode, pod_greedy_standard, seeded_split, strided_defect_indices, GreedyIteration,
    GreedyResult, OdeGreedyOpts, StandardGreedyOpts, TrajectorySource,
};
pub use pod::{BasisUpdate, ReducedBasis};
