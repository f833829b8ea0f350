use crate::error::{Error, Result};
use crate::geometry::{dot, sub, Point};
use crate::mesh::Triangulation;

/// Element of `V_h`, stored as nodal values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    mesh_id: u64,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn new(mesh: &Triangulation, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::IncompatibleOperands(format!(
                "{} values for a mesh with {} nodes",
                values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(FeFunction {
            mesh_id: mesh.id(),
            values,
        })
    }

    pub fn zeros(mesh: &Triangulation) -> Self {
        FeFunction {
            mesh_id: mesh.id(),
            values: vec![0.0; mesh.num_nodes()],
        }
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_mesh(&self, mesh: &Triangulation) -> Result<()> {
        if self.mesh_id != mesh.id() || self.values.len() != mesh.num_nodes() {
            return Err(Error::IncompatibleOperands(
                "function does not belong to this mesh".into(),
            ));
        }
        Ok(())
    }

    /// Vertex values on element `t` in local vertex order.
    pub fn cell_values(&self, mesh: &Triangulation, t: usize) -> [f64; 4] {
        let mut v = [0.0; 4];
        for (k, &i) in mesh.cell(t).iter().enumerate() {
            v[k] = self.values[i];
        }
        v
    }

    /// Constant gradient on element `t`.
    pub fn gradient(&self, mesh: &Triangulation, t: usize) -> Point {
        let g = &mesh.geometry(t).grads;
        let mut out = [0.0; 3];
        for (k, &i) in mesh.cell(t).iter().enumerate() {
            for a in 0..3 {
                out[a] += self.values[i] * g[k][a];
            }
        }
        out
    }

    /// Value at `x`, assumed to lie in element `t`.
    pub fn eval_in(&self, mesh: &Triangulation, t: usize, x: &Point) -> f64 {
        let c = mesh.cell(t);
        let g = self.gradient(mesh, t);
        self.values[c[0]] + dot(&g, &sub(x, mesh.point(c[0])))
    }

    pub fn eval(&self, mesh: &Triangulation, x: &Point) -> Option<f64> {
        mesh.locate(x).map(|t| self.eval_in(mesh, t, x))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// True when every boundary value vanishes (membership in `V_{h,0}`).
    pub fn in_vh0(&self, mesh: &Triangulation) -> bool {
        self.values
            .iter()
            .zip(mesh.boundary_flags())
            .all(|(v, &b)| !b || *v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> FeFunction {
        FeFunction {
            mesh_id: self.mesh_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> FeFunction {
        self.map(|v| s * v)
    }

    /// Nonzero on element `t` (the element belongs to the support).
    pub fn nonzero_on(&self, mesh: &Triangulation, t: usize) -> bool {
        mesh.cell(t).iter().any(|&i| self.values[i] != 0.0)
    }
}

/// Nodal interpolant `Π_h g`.
pub fn interpolate(mesh: &Triangulation, g: impl Fn(&Point) -> f64) -> Result<FeFunction> {
    let mut values = Vec::with_capacity(mesh.num_nodes());
    for (i, p) in mesh.coords().iter().enumerate() {
        let v = g(p);
        if !v.is_finite() {
            return Err(Error::InvalidData {
                element: None,
                message: format!("non-finite value at node {i}"),
            });
        }
        values.push(v);
    }
    FeFunction::new(mesh, values)
}

fn same_mesh(u: &FeFunction, v: &FeFunction) -> Result<()> {
    if u.mesh_id != v.mesh_id || u.values.len() != v.values.len() {
        return Err(Error::IncompatibleOperands(
            "functions live on different meshes".into(),
        ));
    }
    Ok(())
}

/// Nodal maximum `u ∨ v`.
/// `‖u - g‖_{L²}` with a degree-5 (2D) or degree-3 (3D) element rule.
pub fn l2_error(mesh: &Triangulation, u: &FeFunction, g: impl Fn(&Point) -> f64) -> Result<f64> {
    u.check_mesh(mesh)?;
    let n = mesh.dim();
    let rule = crate::integrate::high_order_rule(n);
    let mut sum = 0.0;
    for t in 0..mesh.num_cells() {
        let p = mesh.cell_points(t);
        let v = u.cell_values(mesh, t);
        let mut local = 0.0;
        for (l, w) in &rule {
            let mut x = [0.0; 3];
            let mut uh = 0.0;
            for k in 0..=n {
                uh += l[k] * v[k];
                for c in 0..3 {
                    x[c] += l[k] * p[k][c];
                }
            }
            local += w * (uh - g(&x)).powi(2);
        }
        sum += local * mesh.volume(t);
    }
    Ok(sum.max(0.0).sqrt())
}

pub fn nodal_max(u: &FeFunction, v: &FeFunction) -> Result<FeFunction> {
    same_mesh(u, v)?;
    Ok(FeFunction {
        mesh_id: u.mesh_id,
        values: u.values.iter().zip(&v.values).map(|(a, b)| a.max(*b)).collect(),
    })
}

/// Nodal truncation `(u - c)_+`.
pub fn nodal_positive_part(u: &FeFunction, c: f64) -> FeFunction {
    u.map(|v| (v - c).max(0.0))
}

impl FeFunction {
    pub fn sub(&self, other: &FeFunction) -> Result<FeFunction> {
        same_mesh(self, other)?;
        Ok(FeFunction {
            mesh_id: self.mesh_id,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &FeFunction) -> Result<FeFunction> {
        same_mesh(self, other)?;
        Ok(FeFunction {
            mesh_id: self.mesh_id,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    #[test]
    fn nodal_operations() {
        let m = Triangulation::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
        )
        .unwrap();
        let u = FeFunction::new(&m, vec![-1.0, 2.0, 0.0]).unwrap();
        let v = FeFunction::new(&m, vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(nodal_max(&u, &v).unwrap().values(), &[0.0, 2.0, 3.0]);
        assert_eq!(nodal_max(&u, &u).unwrap(), u);
        assert!(nodal_positive_part(&u, 2.0).values().iter().all(|&x| x == 0.0));
        let other = Triangulation::kuhn(2, 1, BoxDomain::unit()).unwrap();
        let w = FeFunction::zeros(&other);
        assert!(matches!(nodal_max(&u, &w), Err(Error::IncompatibleOperands(_))));
    }

    #[test]
    fn interpolation_reproduces_affine() {
        let m = Triangulation::kuhn(2, 3, BoxDomain::unit()).unwrap();
        let g = |x: &Point| 1.5 * x[0] - 0.25 * x[1] + 2.0;
        let u = interpolate(&m, g).unwrap();
        for &x in &[[0.13, 0.71, 0.0], [0.5, 0.5, 0.0], [0.99, 0.02, 0.0]] {
            assert!((u.eval(&m, &x).unwrap() - g(&x)).abs() < 1e-13);
        }
        let one = interpolate(&m, |_| 1.0).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        assert!(interpolate(&m, |x| 1.0 / x[0]).is_err());
    }
}
