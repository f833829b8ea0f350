//! Cutoffs `η_k = Πh η̃_k` for the ball sequence `B_k = B(x_0, (1 + 2^{-k}) R)`.
//!
//! `η̃_k` is 1 on `B_{k+1}`, vanishes outside `B_k` and follows the quintic
//! smoothstep in between, so `|∇η̃_k| ≤ (15/8) 2^{k+1} / R`.

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::geometry::{dist, norm, point_simplex_distance, Point};
use crate::mesh::Triangulation;

/// Maximal slope of `6s⁵ - 15s⁴ + 10s³` on `[0, 1]`.
pub const SMOOTHSTEP_SLOPE: f64 = 1.875;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffKind {
    /// `B(x_0, 2R)` must lie inside the domain.
    Interior,
    /// The support may meet the boundary.
    Boundary,
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (6.0 * s - 15.0))
}

/// Radii `(plateau, support)` of `η̃_k`.
pub fn cutoff_radii(r: f64, k: u32) -> (f64, f64) {
    let inner = (1.0 + 0.5f64.powi(k as i32 + 1)) * r;
    let outer = (1.0 + 0.5f64.powi(k as i32)) * r;
    (inner, outer)
}

/// Profile `η̃_k(ρ)`.
pub fn cutoff_profile(rho: f64, r: f64, k: u32) -> f64 {
    let (inner, outer) = cutoff_radii(r, k);
    if rho <= inner {
        1.0
    } else if rho >= outer {
        0.0
    } else {
        smoothstep((outer - rho) / (outer - inner))
    }
}

/// Distance from `x` to the mesh boundary.
pub fn boundary_distance(mesh: &Triangulation, x: &Point) -> f64 {
    mesh.boundary_facets()
        .iter()
        .map(|f| {
            let pts: Vec<Point> = f.iter().map(|&i| *mesh.point(i)).collect();
            point_simplex_distance(x, &pts)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Checks that `x0` lies in the mesh and returns the element containing it.
pub fn check_interior_ball(mesh: &Triangulation, x0: &Point, radius: f64) -> Result<usize> {
    let t = mesh
        .locate(x0)
        .ok_or_else(|| Error::Geometry(format!("center {x0:?} lies outside the mesh")))?;
    let d = boundary_distance(mesh, x0);
    if d < radius * (1.0 - 1e-12) {
        return Err(Error::Geometry(format!(
            "ball of radius {radius} around {x0:?} leaves the domain (boundary distance {d})"
        )));
    }
    Ok(t)
}

pub fn build_cutoff(mesh: &Triangulation, x0: &Point, r: f64, k: u32, kind: CutoffKind) -> Result<FeFunction> {
    if !(r > 0.0) {
        return Err(Error::Geometry("cutoff radius must be positive".into()));
    }
    if kind == CutoffKind::Interior {
        check_interior_ball(mesh, x0, 2.0 * r)?;
    }
    let values = mesh
        .coords()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if kind == CutoffKind::Interior && mesh.is_boundary(i) {
                0.0
            } else {
                cutoff_profile(dist(p, x0), r, k)
            }
        })
        .collect();
    FeFunction::new(mesh, values)
}

/// `max|∇η_k| R / 2^k`.
pub fn cutoff_gradient_constant(mesh: &Triangulation, eta: &FeFunction, r: f64, k: u32) -> f64 {
    let g = (0..mesh.num_cells())
        .map(|t| norm(&eta.gradient(mesh, t)))
        .fold(0.0, f64::max);
    g * r / 2f64.powi(k as i32)
}

/// `η_k = 1` at every vertex of an element on which `η_{k+1}` does not vanish.
pub fn cutoffs_nested(mesh: &Triangulation, eta_k: &FeFunction, eta_next: &FeFunction) -> bool {
    (0..mesh.num_cells()).all(|t| {
        let cell = mesh.cell(t);
        let active = cell.iter().any(|&i| eta_next.values()[i] > 0.0);
        !active || cell.iter().any(|&i| eta_k.values()[i] == 1.0)
    })
}
