//! Discrete De Giorgi machinery: iteration lemmas, cutoffs, local bounds,
//! oscillation decay, Hölder seminorms and the quasilinear driver.

pub mod bounds;
pub mod cutoff;
pub mod holder;
pub mod iteration;
pub mod oscillation;
pub mod quasilinear;

pub use bounds::{local_sup_bound_check, neighbor_value_bound_check, DeGiorgiState, NeighborRecord};
pub use cutoff::{build_cutoff, cutoffs_nested, CutoffKind};
pub use holder::{holder_seminorm, HolderMode};
pub use iteration::{calpha_iteration_fit, fast_geometric_bound, telescoping_bound, CalphaParams};
pub use oscillation::{oscillation, oscillation_decay_study, OscillationReport};
pub use quasilinear::{solve_quasilinear, PicardOptions, QuasilinearSolution, ScalarNonlinearity};
