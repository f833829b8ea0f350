use crate::error::{Error, Result};
use crate::fem::cg::pcg;
use crate::fem::coefficient::CoefficientField;
use crate::fem::function::FeFunction;
use crate::fem::load::{quadrature, LoadData};
use crate::fem::sparse::CsrMatrix;
use crate::geometry::{dot, mat_vec, Mat3};
use crate::integrate::order2_rule;
use crate::mesh::Triangulation;
use crate::par::{map_indexed, Execution};

pub type LocalMatrix = [[f64; 4]; 4];

/// `K^T_ij = |T| A∇λ_j · ∇λ_i` for a constant element coefficient.
pub fn local_stiffness(mesh: &Triangulation, t: usize, a: &Mat3) -> LocalMatrix {
    let n = mesh.dim();
    let g = &mesh.geometry(t).grads;
    let vol = mesh.volume(t);
    let mut k = [[0.0; 4]; 4];
    for j in 0..=n {
        let ag = mat_vec(a, &g[j]);
        for i in 0..=n {
            k[i][j] = vol * dot(&ag, &g[i]);
        }
    }
    for i in 0..=n {
        for j in 0..i {
            let s = 0.5 * (k[i][j] + k[j][i]);
            k[i][j] = s;
            k[j][i] = s;
        }
    }
    k
}

/// `b^T_i = ∫_T f λ_i + ∫_T F·∇λ_i` (order-two rule for `f`, barycenter value of `F`).
pub fn local_load(mesh: &Triangulation, t: usize, load: &LoadData) -> Result<[f64; 4]> {
    let n = mesh.dim();
    let vol = mesh.volume(t);
    let g = &mesh.geometry(t).grads;
    let (pts, w) = quadrature(mesh, t);
    let (bary, _) = order2_rule(n);
    let mut b = [0.0; 4];
    for (x, l) in pts.iter().zip(&bary) {
        let fx = (load.f)(x);
        if !fx.is_finite() {
            return Err(Error::invalid(Some(t), "source term is not finite"));
        }
        for i in 0..=n {
            b[i] += vol * w * fx * l[i];
        }
    }
    let fl = (load.flux)(&mesh.barycenter(t));
    if fl.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(Some(t), "flux field is not finite"));
    }
    for i in 0..=n {
        b[i] += vol * dot(&fl, &g[i]);
    }
    Ok(b)
}

/// Global matrix from element matrices, gathered row by row.
pub fn gather_matrix(mesh: &Triangulation, locals: &[LocalMatrix], exec: Execution) -> CsrMatrix {
    let rows = map_indexed(exec, mesh.num_nodes(), |i| {
        let mut cols = mesh.node_neighbors(i);
        cols.push(i);
        cols.sort_unstable();
        let mut vals = vec![0.0; cols.len()];
        for &t in mesh.node_cells(i) {
            let cell = mesh.cell(t);
            let li = cell.iter().position(|&v| v == i).expect("node in its patch");
            for (lj, &j) in cell.iter().enumerate() {
                let k = cols.binary_search(&j).expect("neighbour in pattern");
                vals[k] += locals[t][li][lj];
            }
        }
        cols.into_iter().zip(vals).collect()
    });
    CsrMatrix::from_rows(rows)
}

pub fn element_matrices(
    mesh: &Triangulation,
    a: &CoefficientField,
    exec: Execution,
) -> Result<Vec<LocalMatrix>> {
    map_indexed(exec, mesh.num_cells(), |t| {
        a.element_matrix(mesh, t).map(|m| local_stiffness(mesh, t, &m))
    })
    .into_iter()
    .collect()
}

/// Unconstrained stiffness matrix.
pub fn assemble_matrix(mesh: &Triangulation, a: &CoefficientField, exec: Execution) -> Result<CsrMatrix> {
    let locals = element_matrices(mesh, a, exec)?;
    Ok(gather_matrix(mesh, &locals, exec))
}

pub fn assemble_rhs(mesh: &Triangulation, load: &LoadData, exec: Execution) -> Result<Vec<f64>> {
    let locals: Vec<[f64; 4]> = map_indexed(exec, mesh.num_cells(), |t| local_load(mesh, t, load))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(map_indexed(exec, mesh.num_nodes(), |i| {
        mesh.node_cells(i)
            .iter()
            .map(|&t| {
                let li = mesh.cell(t).iter().position(|&v| v == i).unwrap();
                locals[t][li]
            })
            .sum()
    }))
}

/// Unconstrained stiffness matrix, load vector and the Dirichlet (boundary) set.
#[derive(Clone, Debug)]
pub struct StiffnessSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub boundary: Vec<bool>,
    mesh_id: u64,
}

impl StiffnessSystem {
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.rhs.len()).filter(|&i| !self.boundary[i]).collect()
    }
}

pub fn assemble(mesh: &Triangulation, a: &CoefficientField, load: &LoadData) -> Result<StiffnessSystem> {
    assemble_with(mesh, a, load, Execution::default())
}

pub fn assemble_with(
    mesh: &Triangulation,
    a: &CoefficientField,
    load: &LoadData,
    exec: Execution,
) -> Result<StiffnessSystem> {
    Ok(StiffnessSystem {
        matrix: assemble_matrix(mesh, a, exec)?,
        rhs: assemble_rhs(mesh, load, exec)?,
        boundary: mesh.boundary_flags().to_vec(),
        mesh_id: mesh.id(),
    })
}

#[derive(Clone, Debug)]
pub struct DirichletSolution {
    pub u: FeFunction,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Solve on the free (interior) block by elimination; boundary values are zero.
pub fn solve_dirichlet(mesh: &Triangulation, system: &StiffnessSystem) -> Result<DirichletSolution> {
    solve_dirichlet_with(mesh, system, Execution::default())
}

pub fn solve_dirichlet_with(
    mesh: &Triangulation,
    system: &StiffnessSystem,
    exec: Execution,
) -> Result<DirichletSolution> {
    if system.mesh_id != mesh.id() {
        return Err(Error::IncompatibleOperands("system assembled on another mesh".into()));
    }
    let free = system.free_indices();
    let mut values = vec![0.0; mesh.num_nodes()];
    if free.is_empty() {
        return Ok(DirichletSolution {
            u: FeFunction::new(mesh, values)?,
            iterations: 0,
            history: vec![0.0],
        });
    }
    let k = system.matrix.principal_submatrix(&free);
    let b: Vec<f64> = free.iter().map(|&i| system.rhs[i]).collect();
    let cap = (20.0 * (free.len() as f64).sqrt()).ceil() as usize;
    let out = pcg(exec, &k, &b, 1e-10, cap.max(20))?;
    for (k, &i) in free.iter().enumerate() {
        values[i] = out.x[k];
    }
    Ok(DirichletSolution {
        u: FeFunction::new(mesh, values)?,
        iterations: out.iterations,
        history: out.history,
    })
}

/// Assemble and solve in one step.
pub fn solve(mesh: &Triangulation, a: &CoefficientField, load: &LoadData) -> Result<FeFunction> {
    let sys = assemble(mesh, a, load)?;
    Ok(solve_dirichlet(mesh, &sys)?.u)
}

/// `max_i |(Ku - b)_i| / (‖K‖_∞ ‖u‖_∞ + ‖b‖_∞)` over interior nodes.
pub fn galerkin_defect(system: &StiffnessSystem, u: &FeFunction) -> f64 {
    let ku = system.matrix.matvec(u.values());
    let scale = system.matrix.inf_norm() * u.max_abs()
        + system.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let worst = (0..ku.len())
        .filter(|&i| !system.boundary[i])
        .map(|i| (ku[i] - system.rhs[i]).abs())
        .fold(0.0, f64::max);
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    fn right_triangle() -> Triangulation {
        Triangulation::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn right_triangle_stiffness() {
        let m = right_triangle();
        let k = local_stiffness(&m, 0, &crate::fem::coefficient::scalar_matrix(1.0));
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - want[i][j]).abs() < 1e-15);
            }
        }
        let k2 = local_stiffness(&m, 0, &crate::fem::coefficient::scalar_matrix(2.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k2[i][j], 2.0 * k[i][j]);
            }
        }
    }

    #[test]
    fn unit_source_load() {
        let m = right_triangle();
        let b = local_load(&m, 0, &LoadData::source(|_| 1.0)).unwrap();
        for i in 0..3 {
            assert!((b[i] - 1.0 / 6.0).abs() < 1e-15);
        }
        let bad = LoadData::source(|_| f64::NAN);
        assert!(matches!(local_load(&m, 0, &bad), Err(Error::InvalidData { element: Some(0), .. })));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        let u = solve(&m, &CoefficientField::identity(), &LoadData::zero()).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn row_sums_vanish_and_symmetric() {
        let m = Triangulation::kuhn(3, 2, BoxDomain::unit()).unwrap();
        let k = assemble_matrix(&m, &CoefficientField::identity(), Execution::default()).unwrap();
        assert!(k.asymmetry() < 1e-12);
        for i in 0..m.num_nodes() {
            let s: f64 = k.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-14);
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let m = Triangulation::kuhn(2, 16, BoxDomain::unit()).unwrap();
        let a = CoefficientField::scalar_fn("a", 1.0, 3.0, |x| 1.0 + 2.0 * x[0] * x[1]).unwrap();
        let l = LoadData::source(|x| x[0].sin());
        let s = assemble_with(&m, &a, &l, Execution::Sequential).unwrap();
        let p = assemble_with(&m, &a, &l, Execution::Parallel).unwrap();
        assert_eq!(s.matrix, p.matrix);
        assert_eq!(s.rhs, p.rhs);
    }
}
