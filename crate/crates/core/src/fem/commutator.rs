use crate::error::Result;
use crate::fem::function::FeFunction;
use crate::geometry::{norm, solve_small, Point};
use crate::integrate::abs_integral;
use crate::mesh::Triangulation;
use crate::par::{map_indexed, Execution};

/// Per-element defect of the nodal interpolant of a product of two P1 functions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommutatorDefect {
    /// `max_T |uw - Πh(uw)|`.
    pub max_defect: f64,
    /// `h_T max_T |∇(uw - Πh(uw))|`.
    pub max_grad_defect: f64,
    /// `h_T ⨍|∇u| ⨍|w - <w>|`.
    pub rhs: f64,
    /// `(max_defect + max_grad_defect) / rhs`, zero when both sides vanish.
    pub constant: f64,
}

/// Coefficients of `uw - Πh(uw) = Σ_ij M_ij λ_i λ_j`, with
/// `M_ij = -(u_i - u_j)(w_i - w_j)/2`.
fn defect_form(u: &[f64; 4], w: &[f64; 4], n: usize) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for i in 0..=n {
        for j in 0..=n {
            m[i][j] = -0.5 * (u[i] - u[j]) * (w[i] - w[j]);
        }
    }
    m
}

/// Max of `|λᵀMλ|` over the simplex `λ >= 0, Σλ = 1`, from the stationary points
/// of every face.
fn max_abs_on_simplex(m: &[[f64; 4]; 4], n: usize) -> f64 {
    let mut best = 0.0_f64;
    for mask in 1u32..(1 << (n + 1)) {
        let s: Vec<usize> = (0..=n).filter(|&i| mask & (1 << i) != 0).collect();
        if s.len() < 2 {
            continue;
        }
        let k = s.len();
        let mut a = vec![vec![0.0; k + 1]; k + 1];
        let mut b = vec![0.0; k + 1];
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                a[r][c] = 2.0 * m[i][j];
            }
            a[r][k] = -1.0;
            a[k][r] = 1.0;
        }
        b[k] = 1.0;
        let Some(x) = solve_small(a, b) else { continue };
        if x[..k].iter().any(|&l| l < -1e-12) {
            continue;
        }
        let mut val = 0.0;
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                val += m[i][j] * x[r] * x[c];
            }
        }
        best = best.max(val.abs());
    }
    best
}

fn element_defect(mesh: &Triangulation, u: &FeFunction, w: &FeFunction, t: usize) -> CommutatorDefect {
    let n = mesh.dim();
    let uv = u.cell_values(mesh, t);
    let wv = w.cell_values(mesh, t);
    let m = defect_form(&uv, &wv, n);
    let g = &mesh.geometry(t).grads;
    let h = mesh.diameter(t);
    let max_defect = max_abs_on_simplex(&m, n);
    let mut grad = 0.0_f64;
    for j in 0..=n {
        let mut v: Point = [0.0; 3];
        for k in 0..=n {
            for d in 0..3 {
                v[d] += 2.0 * m[k][j] * g[k][d];
            }
        }
        grad = grad.max(norm(&v));
    }
    let max_grad_defect = h * grad;
    let vol = mesh.volume(t);
    let mean = wv[..=n].iter().sum::<f64>() / (n + 1) as f64;
    let mut centred = [0.0; 4];
    for i in 0..=n {
        centred[i] = wv[i] - mean;
    }
    let osc_w = abs_integral(vol, n, &centred) / vol;
    let rhs = h * norm(&u.gradient(mesh, t)) * osc_w;
    let lhs = max_defect + max_grad_defect;
    let constant = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    CommutatorDefect {
        max_defect,
        max_grad_defect,
        rhs,
        constant,
    }
}

/// Per-element commutator defects `uw - Πh(uw)`, computed exactly from the
/// element quadratic.
pub fn product_commutator_defect(
    mesh: &Triangulation,
    u: &FeFunction,
    w: &FeFunction,
) -> Result<Vec<CommutatorDefect>> {
    u.check_mesh(mesh)?;
    w.check_mesh(mesh)?;
    Ok(map_indexed(Execution::default(), mesh.num_cells(), |t| {
        element_defect(mesh, u, w, t)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    #[test]
    fn hat_squared_defect_is_quarter() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        let i = 12;
        assert!(!m.is_boundary(i));
        let mut v = vec![0.0; m.num_nodes()];
        v[i] = 1.0;
        let psi = FeFunction::new(&m, v).unwrap();
        let d = product_commutator_defect(&m, &psi, &psi).unwrap();
        for t in 0..m.num_cells() {
            if m.cell(t).contains(&i) {
                assert!((d[t].max_defect - 0.25).abs() < 1e-14);
            } else {
                assert_eq!(d[t].max_defect, 0.0);
            }
        }
    }

    #[test]
    fn constant_factor_has_no_defect() {
        let m = Triangulation::kuhn(3, 2, BoxDomain::unit()).unwrap();
        let u = crate::fem::interpolate(&m, |x| x[0] * x[1] - x[2]).unwrap();
        let w = crate::fem::interpolate(&m, |_| 3.0).unwrap();
        for d in product_commutator_defect(&m, &u, &w).unwrap() {
            assert_eq!(d.max_defect, 0.0);
            assert_eq!(d.max_grad_defect, 0.0);
        }
    }
}
