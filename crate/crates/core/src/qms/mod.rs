//! Quantum Markov states built from localized transition rules.

mod boundary;
mod compat;
mod diagonal;
mod model;
mod rule;

pub use boundary::{
    boundary_map, boundary_residual, children_product, solve_boundary, BoundaryFamily,
    SolvedBoundary, SolverOptions,
};
pub use compat::{
    check_compatibility, translation_invariance_defect, CompatibilityReport, CompatibilityRow,
};
pub use diagonal::DiagonalState;
pub use model::{advance_density, FiniteState, LevelDensity, Path, QmsModel};
pub use rule::{level_amplitude, TransitionRule};
