//! Continuous piecewise affine finite elements.

pub mod assembly;
pub mod cg;
pub mod coefficient;
pub mod commutator;
pub mod function;
pub mod load;
pub mod sparse;

pub use assembly::{
    assemble, assemble_matrix, assemble_with, galerkin_defect, local_load, local_stiffness, solve,
    solve_dirichlet, DirichletSolution, StiffnessSystem,
};
pub use coefficient::CoefficientField;
pub use commutator::{product_commutator_defect, CommutatorDefect};
pub use function::{interpolate, l2_error, nodal_max, nodal_positive_part, FeFunction};
pub use load::{LoadData, ScalarFn, VectorFn};
pub use sparse::CsrMatrix;
