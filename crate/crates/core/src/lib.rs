//! Piecewise affine finite elements on simplicial meshes, with numerical audits of
//! discrete De Giorgi estimates: mesh conditions, subsolution calculus, discrete
//! Caccioppoli and Poincaré inequalities, local sup bounds, oscillation decay and
//! Hölder seminorms on graded meshes.

pub mod conditions;
pub mod degiorgi;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod inequalities;
pub mod integrate;
pub mod io;
pub mod mesh;
pub mod par;
pub mod problems;
pub mod refine;

pub use error::{Error, Result};
pub use fem::{CoefficientField, FeFunction, LoadData, StiffnessSystem};
pub use mesh::{BoxDomain, Triangulation};
pub use par::Execution;
