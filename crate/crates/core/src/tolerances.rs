//! Numerical thresholds shared across the crate.
//!
//! Values are absolute unless the name says otherwise.

/// Hermiticity, PSD and trace checks on density matrices. Eigenvalues in
/// `[-DENSITY_TOL, 0)` are clipped to zero before entropy evaluation.
pub const DENSITY_TOL: f64 = 1e-10;

/// Unitality of transition rules, `‖E_x(1) - 1‖_max`.
pub const UNITALITY_TOL: f64 = 1e-10;

/// Commutation precheck `‖[K, D]‖_max` for the increment formula.
pub const COMMUTATOR_TOL: f64 = 1e-10;

/// Smallest eigenvalue accepted by the matrix logarithm.
pub const LOG_FLOOR: f64 = 1e-14;

/// Boundary fixed-point iteration.
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 10_000;

/// Residual accepted for `Tr_children(A (h ⊗ h) A*) = h`.
pub const BOUNDARY_RESIDUAL_TOL: f64 = 1e-10;

/// Compatibility and marginal defects.
pub const COMPATIBILITY_TOL: f64 = 1e-9;

/// Entropy identities (entropy identity, increment formula, constancy).
pub const ENTROPY_IDENTITY_TOL: f64 = 1e-8;

/// `| |λ| - 1 |` below which an eigenvalue counts as peripheral.
pub const PERIPHERAL_TOL: f64 = 1e-9;

/// Largest dense operator dimension (`d^{|support|}`).
pub const DENSE_DIM_CAP: usize = 1 << 14;

/// Largest diagonal weight table (`d^{|Λ_n|}` entries).
pub const DIAGONAL_DIM_CAP: usize = 1 << 15;

/// Test observables for compatibility checks: all matrix units up to this
/// dimension, otherwise `RANDOM_OBSERVABLES` seeded Hermitian matrices.
pub const MATRIX_UNIT_MAX_DIM: usize = 64;
pub const RANDOM_OBSERVABLES: usize = 200;

pub const DEFAULT_SEED: u64 = 42;
