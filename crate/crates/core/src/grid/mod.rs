//! Staggered (MAC) grid discretization on rectangles: grid description,
//! field types, discrete operators, sparse matrices, conjugate gradients and
//! discrete norms.

mod cg;
mod field;
mod norm;
mod ops;
mod sparse;
mod spec;

pub use cg::{cg_solve, cg_solve_monitored, cg_solve_with, CgOptions, LinearSolveReport};
pub(crate) use cg::norm;
pub use field::{ScalarField, StaggeredVectorField, TensorField};
pub use norm::{field_norm, norm_from_sq, power_sum, FieldMagnitude, SpaceTimeNorm};
pub use ops::{divergence, gradient, rate_of_strain, vector_laplacian, Operators};
pub use sparse::{LinearOperator, SparseMatrix};
pub use spec::{GridSpec, MIN_CELLS};
