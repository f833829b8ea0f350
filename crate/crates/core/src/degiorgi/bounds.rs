//! Local sup bounds, the De Giorgi level sequence and the neighbour-value bound.

use crate::conditions::{acute_path, AcutePath};
use crate::degiorgi::cutoff::{build_cutoff, check_interior_ball, CutoffKind};
use crate::error::{Error, Result};
use crate::fem::assembly::assemble_rhs;
use crate::fem::{assemble_matrix, nodal_positive_part, CoefficientField, FeFunction, LoadData};
use crate::geometry::Point;
use crate::inequalities::InequalityRecord;
use crate::integrate::{product_integral, square_integral};
use crate::mesh::{Seed, Triangulation};
use crate::par::Execution;

fn region_volume(mesh: &Triangulation, cells: &[usize]) -> f64 {
    cells.iter().map(|&t| mesh.volume(t)).sum()
}

/// `⨍_{Ω(B(x_0, 2R))} (u - c)_+²` with the nodal positive part.
pub fn truncated_mean_square(mesh: &Triangulation, u: &FeFunction, c: f64, region: &[usize]) -> f64 {
    let n = mesh.dim();
    let w = nodal_positive_part(u, c);
    let s: f64 = region
        .iter()
        .map(|&t| square_integral(mesh.volume(t), n, &w.cell_values(mesh, t)))
        .sum();
    s / region_volume(mesh, region)
}

/// Local boundedness
/// `max_{Ω'(B(x_0,R))} (u - c)_+² ≤ C [⨍_{Ω(B(x_0,2R))} (u - c)_+² + (‖G‖_p² + ‖f‖_q²) R^{2δ}]`.
pub fn local_sup_bound_check(
    mesh: &Triangulation,
    u: &FeFunction,
    x0: &Point,
    r: f64,
    c: f64,
    load: &LoadData,
) -> Result<InequalityRecord> {
    u.check_mesh(mesh)?;
    let t0 = check_interior_ball(mesh, x0, 2.0 * r)?;
    if r < mesh.diameter(t0) {
        return Err(Error::Geometry(format!(
            "radius {r} is below the local mesh size {}",
            mesh.diameter(t0)
        )));
    }
    let inner = mesh.prime_neighborhood(x0, r);
    let lhs = inner
        .iter()
        .flat_map(|&t| mesh.cell(t).iter())
        .map(|&i| (u.values()[i] - c).max(0.0).powi(2))
        .fold(0.0, f64::max);
    let outer = mesh.neighborhood(Seed::Ball { center: *x0, radius: 2.0 * r });
    let mean = truncated_mean_square(mesh, u, c, &outer);
    let data = load.dominating_norm_p(mesh).powi(2) + load.f_norm_q(mesh).powi(2);
    let tail = data * r.powf(2.0 * load.delta());
    Ok(InequalityRecord::new("local_sup", lhs, mean + tail)
        .param("x0", vec![x0[0], x0[1], x0[2]])
        .param("R", r)
        .param("c", c)
        .param("mean_term", mean)
        .param("data_term", tail))
}

/// De Giorgi level sequence around `B(x_0, R)`.
#[derive(Clone, Debug)]
pub struct DeGiorgiState {
    pub x0: Point,
    pub r: f64,
    pub c: f64,
    /// `λ_∞² = max(⨍_{Ω(2B)} (u - c)_+², (‖G‖² + ‖f‖²) R^{2δ})`.
    pub lambda_inf: f64,
    pub lambda: Vec<f64>,
    pub cutoffs: Vec<FeFunction>,
    /// `|A_k|`, `A_k = {η_k² (u - λ_k - c)_+² > 0}`.
    pub level_measure: Vec<f64>,
    /// `a_k = ⨍_{Ω(2B)} (u - λ_k - c)_+² η_k²`.
    pub energy: Vec<f64>,
}

impl DeGiorgiState {
    pub fn build(
        mesh: &Triangulation,
        u: &FeFunction,
        x0: &Point,
        r: f64,
        c: f64,
        load: &LoadData,
        levels: u32,
    ) -> Result<Self> {
        u.check_mesh(mesh)?;
        let n = mesh.dim();
        let outer = mesh.neighborhood(Seed::Ball { center: *x0, radius: 2.0 * r });
        if outer.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let vol = region_volume(mesh, &outer);
        let mean = truncated_mean_square(mesh, u, c, &outer);
        let data = load.dominating_norm_p(mesh).powi(2) + load.f_norm_q(mesh).powi(2);
        let lambda_inf = mean.max(data * r.powf(2.0 * load.delta())).sqrt();
        let mut lambda = Vec::new();
        let mut cutoffs = Vec::new();
        let mut level_measure = Vec::new();
        let mut energy = Vec::new();
        for k in 0..=levels {
            let lk = (1.0 - 0.5f64.powi(k as i32)) * lambda_inf;
            let eta = build_cutoff(mesh, x0, r, k, CutoffKind::Interior)?;
            let w = nodal_positive_part(u, lk + c);
            let mut measure = 0.0;
            let mut a = 0.0;
            for &t in &outer {
                let e = eta.cell_values(mesh, t);
                let wv = w.cell_values(mesh, t);
                let on = e[..=n].iter().any(|&x| x != 0.0) && wv[..=n].iter().any(|&x| x != 0.0);
                if on {
                    measure += mesh.volume(t);
                    a += product_integral(mesh.volume(t), n, &[e, e, wv, wv]);
                }
            }
            lambda.push(lk);
            cutoffs.push(eta);
            level_measure.push(measure);
            energy.push(a / vol);
        }
        Ok(DeGiorgiState {
            x0: *x0,
            r,
            c,
            lambda_inf,
            lambda,
            cutoffs,
            level_measure,
            energy,
        })
    }
}

/// Neighbour-value bound along an acute path `x_i = y_0, ..., y_N = x_j`.
#[derive(Clone, Debug)]
pub struct NeighborRecord {
    pub path: AcutePath,
    pub value_i: f64,
    pub value_j: f64,
    /// Recursive bound `U_{s+1} = 1 - τ_s (1 - U_s) + L_{s+1}`, `U_0 = v(x_i)`,
    /// with `τ_s = -K(y_s, y_{s+1}) / K(y_{s+1}, y_{s+1})` and `L = b / K_{yy}`.
    pub bound: f64,
    /// `1 - τ^N + τ^N v(x_i)` with the path constant `τ`.
    pub homogeneous_bound: f64,
    /// `C` with `Σ L_s^+ = C (‖F‖_p + ‖f‖_q) h_T^δ`.
    pub constant: f64,
    pub holds: bool,
}

/// `v(x_j) ≤ 1 - τ^N + τ^N v(x_i) + C (‖F‖_p + ‖f‖_q) h_T^δ` for a subsolution
/// `0 ≤ v ≤ 1` and two vertices of an element away from the boundary.
pub fn neighbor_value_bound_check(
    mesh: &Triangulation,
    v: &FeFunction,
    t: usize,
    i: usize,
    j: usize,
    a: &CoefficientField,
    load: &LoadData,
) -> Result<NeighborRecord> {
    v.check_mesh(mesh)?;
    if t >= mesh.num_cells() {
        return Err(Error::invalid(Some(t), "element id out of range"));
    }
    if mesh.cell(t).iter().any(|&x| mesh.is_boundary(x)) {
        return Err(Error::Geometry(format!("element {t} touches the boundary")));
    }
    if v.values().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidOperand("function must take values in [0, 1]".into()));
    }
    let k = assemble_matrix(mesh, a, Execution::default())?;
    let b = assemble_rhs(mesh, load, Execution::default())?;
    let path = acute_path(mesh, &k, t, i, j)?;
    let vals = v.values();
    let mut u = vals[i];
    let mut lsum = 0.0;
    for w in path.nodes.windows(2) {
        let (prev, y) = (w[0], w[1]);
        let kyy = k.get(y, y);
        let tau_s = -k.get(y, prev) / kyy;
        let l = b[y] / kyy;
        u = 1.0 - tau_s * (1.0 - u) + l;
        lsum += l.max(0.0);
    }
    let nsteps = path.nodes.len() as i32 - 1;
    let tau_n = if nsteps == 0 { 1.0 } else { path.tau.powi(nsteps) };
    let homogeneous_bound = 1.0 - tau_n + tau_n * vals[i];
    let norms = load.flux_norm_p(mesh) + load.f_norm_q(mesh);
    let h = mesh.diameter(t);
    let denom = norms * h.powf(load.delta());
    let constant = if denom > 0.0 { lsum / denom } else { 0.0 };
    let tol = 1e-12;
    let holds = vals[j] <= u + tol && vals[j] <= homogeneous_bound + lsum + tol;
    Ok(NeighborRecord {
        path,
        value_i: vals[i],
        value_j: vals[j],
        bound: u,
        homogeneous_bound,
        constant,
        holds,
    })
}
