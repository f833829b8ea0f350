//! Damped Picard iteration for `-div(a(x, u, ∇u) ∇u) = f - div F`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::coefficient::scalar_matrix;
use crate::fem::assembly::{assemble_rhs, assemble_with, galerkin_defect, solve_dirichlet_with};
use crate::fem::{CoefficientField, FeFunction, LoadData, StiffnessSystem};
use crate::geometry::Point;
use crate::mesh::Triangulation;
use crate::par::{map_indexed, Execution};

pub type ScalarNonlinearity = Arc<dyn Fn(&Point, f64, &Point) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub damping: f64,
    pub update_tolerance: f64,
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub exec: Execution,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            damping: 0.5,
            update_tolerance: 1e-8,
            residual_tolerance: 1e-7,
            max_iterations: 200,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuasilinearSolution {
    pub u: FeFunction,
    pub iterations: usize,
    /// Nodal sup-norm of each update.
    pub updates: Vec<f64>,
    /// Relative frozen-coefficient Galerkin defect of each iterate; the last entry
    /// is the defect of `u` with its own coefficient.
    pub residuals: Vec<f64>,
    /// Coefficient frozen at the last iterate; `u` is the discrete solution of the
    /// linear problem with this coefficient.
    pub frozen: CoefficientField,
}

/// Per-element coefficient `a(x_T, ū_T, ∇u|_T)` with `x_T` the barycenter and `ū_T`
/// the mean of the vertex values.
pub fn freeze(
    mesh: &Triangulation,
    a: &(dyn Fn(&Point, f64, &Point) -> f64 + Send + Sync),
    lower: f64,
    upper: f64,
    u: &FeFunction,
    exec: Execution,
) -> Result<CoefficientField> {
    u.check_mesh(mesh)?;
    let vals = map_indexed(exec, mesh.num_cells(), |t| {
        let cv = u.cell_values(mesh, t);
        let mean = cv[..=mesh.dim()].iter().sum::<f64>() / (mesh.dim() + 1) as f64;
        a(&mesh.barycenter(t), mean, &u.gradient(mesh, t))
    });
    let tol = 1e-12 * upper;
    let mut mats = Vec::with_capacity(vals.len());
    for (t, v) in vals.into_iter().enumerate() {
        if !v.is_finite() || v < lower - tol || v > upper + tol {
            return Err(Error::invalid(
                Some(t),
                format!("nonlinearity value {v} outside [{lower}, {upper}]"),
            ));
        }
        mats.push(scalar_matrix(v));
    }
    CoefficientField::piecewise("frozen", lower, upper, mesh, mats)
}

fn frozen_system(
    mesh: &Triangulation,
    field: &CoefficientField,
    rhs: &[f64],
    exec: Execution,
) -> Result<StiffnessSystem> {
    let mut sys = assemble_with(mesh, field, &LoadData::zero(), exec)?;
    sys.rhs = rhs.to_vec();
    Ok(sys)
}

/// Solve the quasilinear Dirichlet problem with `lower ≤ a ≤ upper`.
///
/// The first iterate is the linear solution with `a(x, 0, 0)`; later steps mix the
/// frozen-coefficient solution with the current iterate using `options.damping`.
/// Iteration stops once the frozen solution moves by at most `update_tolerance`
/// and satisfies the nonlinear identity to `residual_tolerance`.
pub fn solve_quasilinear(
    mesh: &Triangulation,
    a: ScalarNonlinearity,
    lower: f64,
    upper: f64,
    load: &LoadData,
    options: PicardOptions,
) -> Result<QuasilinearSolution> {
    let exec = options.exec;
    let rhs = assemble_rhs(mesh, load, exec)?;
    let mut u = FeFunction::zeros(mesh);
    let mut field = freeze(mesh, a.as_ref(), lower, upper, &u, exec)?;
    let sys = frozen_system(mesh, &field, &rhs, exec)?;
    u = solve_dirichlet_with(mesh, &sys, exec)?.u;
    let mut updates: Vec<f64> = Vec::new();
    let mut residuals = Vec::new();
    for m in 1..=options.max_iterations {
        field = freeze(mesh, a.as_ref(), lower, upper, &u, exec)?;
        let sys = frozen_system(mesh, &field, &rhs, exec)?;
        residuals.push(galerkin_defect(&sys, &u));
        let target = solve_dirichlet_with(mesh, &sys, exec)?.u;
        let change = target.sub(&u)?.max_abs();
        if change <= options.update_tolerance {
            let refrozen = freeze(mesh, a.as_ref(), lower, upper, &target, exec)?;
            let own = galerkin_defect(&frozen_system(mesh, &refrozen, &rhs, exec)?, &target);
            if own <= options.residual_tolerance {
                residuals.push(own);
                updates.push(change);
                return Ok(QuasilinearSolution {
                    u: target,
                    iterations: m,
                    updates,
                    residuals,
                    frozen: field,
                });
            }
        }
        let w = options.damping;
        let next: Vec<f64> = u
            .values()
            .iter()
            .zip(target.values())
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect();
        let next = FeFunction::new(mesh, next)?;
        updates.push(next.sub(&u)?.max_abs());
        u = next;
    }
    Err(Error::FixedPointFailure {
        iterations: options.max_iterations,
        last_update: *updates.last().unwrap_or(&f64::NAN),
        history: updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::solve;
    use crate::geometry::dot;
    use crate::mesh::{BoxDomain, Triangulation};

    fn mesh() -> Triangulation {
        Triangulation::kuhn(2, 8, BoxDomain::unit()).unwrap()
    }

    #[test]
    fn constant_nonlinearity_is_linear_solve() {
        let m = mesh();
        let load = LoadData::source(|_| 1.0);
        let q = solve_quasilinear(&m, Arc::new(|_, _, _| 1.0), 1.0, 1.0, &load, PicardOptions::default()).unwrap();
        let lin = solve(&m, &CoefficientField::identity(), &load).unwrap();
        assert_eq!(q.iterations, 1);
        assert!(q.u.sub(&lin).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn space_dependent_is_single_solve() {
        let m = mesh();
        let load = LoadData::source(|_| 1.0);
        let a = |x: &Point| 1.0 + x[0];
        let q = solve_quasilinear(&m, Arc::new(move |x, _, _| a(x)), 1.0, 2.0, &load, PicardOptions::default()).unwrap();
        let lin = solve(&m, &CoefficientField::scalar_fn("1+x", 1.0, 2.0, a).unwrap(), &load).unwrap();
        assert_eq!(q.iterations, 1);
        assert!(q.u.sub(&lin).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn gradient_dependent_converges() {
        let m = mesh();
        let load = LoadData::source(|_| 1.0);
        let a: ScalarNonlinearity = Arc::new(|_, _, g| 1.0 + 1.0 / (1.0 + dot(g, g)));
        let q = solve_quasilinear(&m, a, 1.0, 2.0, &load, PicardOptions::default()).unwrap();
        assert!(q.iterations <= 200);
        assert!(*q.residuals.last().unwrap() <= 1e-7);
        let sys = crate::fem::assembly::assemble(&m, &q.frozen, &load).unwrap();
        assert!(galerkin_defect(&sys, &q.u) <= 1e-10);
    }

    #[test]
    fn out_of_range_nonlinearity_is_rejected() {
        let m = mesh();
        let err = solve_quasilinear(&m, Arc::new(|_, _, _| 3.0), 1.0, 2.0, &LoadData::zero(), PicardOptions::default());
        assert!(matches!(err, Err(Error::InvalidData { .. })));
    }
}
