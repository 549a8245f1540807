//! Dense complex linear algebra over multi-qubit registers.
//!
//! Qubit 0 is the most significant bit of every basis label. All operations
//! are pure: they take shared references and return new values.

mod density;
mod layer;
mod state;
mod symmetric;

pub use density::{
    hermitian_eigenvalues, partial_trace, trace_distance, trace_distance_pure, DensityOperator,
};
pub use layer::{apply_layer, apply_layer_in_place, root_of_unity, LayerKind, UnitaryLayer};
pub use state::PureState;
pub use symmetric::{permutation_operator, symmetric_projector, SymmetricBasis};

pub use num_complex::Complex64;

/// Tolerance for the unit-norm invariant on states.
pub const NORM_TOL: f64 = 1e-10;

/// Tolerance for Hermiticity, trace and unitarity checks.
pub const OPERATOR_TOL: f64 = 1e-10;

/// Smallest admissible eigenvalue of a density operator.
pub const PSD_TOL: f64 = -1e-8;
