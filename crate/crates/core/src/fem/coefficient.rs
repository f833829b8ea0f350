use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3};

use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point};
use crate::mesh::Triangulation;

pub type MatrixFn = Arc<dyn Fn(&Point) -> Mat3 + Send + Sync>;

/// Symmetric, uniformly elliptic coefficient `A(x)` with bounds `c|v|² ≤ v·Av ≤ C|v|²`.
///
/// Assembly samples `A` once per element at the barycenter.
#[derive(Clone)]
pub struct CoefficientField {
    eval: MatrixFn,
    lower: f64,
    upper: f64,
    label: String,
    cells: Option<Arc<CellTable>>,
}

#[derive(Debug)]
struct CellTable {
    mesh_id: u64,
    values: Vec<Mat3>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("label", &self.label)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

pub fn scalar_matrix(s: f64) -> Mat3 {
    [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]]
}

impl CoefficientField {
    pub fn from_fn(
        label: impl Into<String>,
        lower: f64,
        upper: f64,
        eval: impl Fn(&Point) -> Mat3 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower && upper.is_finite()) {
            return Err(Error::invalid(
                None,
                format!("ellipticity bounds must satisfy 0 < c <= C, got c = {lower}, C = {upper}"),
            ));
        }
        Ok(CoefficientField {
            eval: Arc::new(eval),
            lower,
            upper,
            label: label.into(),
            cells: None,
        })
    }

    /// Piecewise-constant field with one matrix per element of `mesh`.
    pub fn piecewise(
        label: impl Into<String>,
        lower: f64,
        upper: f64,
        mesh: &Triangulation,
        values: Vec<Mat3>,
    ) -> Result<Self> {
        if values.len() != mesh.num_cells() {
            return Err(Error::IncompatibleOperands(format!(
                "{} element values for {} elements",
                values.len(),
                mesh.num_cells()
            )));
        }
        let table = Arc::new(CellTable {
            mesh_id: mesh.id(),
            values,
        });
        let lookup = table.clone();
        let owned = Arc::new(mesh.clone());
        let mut field = Self::from_fn(label, lower, upper, move |x| match owned.locate(x) {
            Some(t) => lookup.values[t],
            None => [[f64::NAN; 3]; 3],
        })?;
        field.cells = Some(table);
        Ok(field)
    }

    /// `A = a(x) I` with `lower <= a <= upper`.
    pub fn scalar_fn(
        label: impl Into<String>,
        lower: f64,
        upper: f64,
        a: impl Fn(&Point) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::from_fn(label, lower, upper, move |x| scalar_matrix(a(x)))
    }

    pub fn identity() -> Self {
        Self::scalar(1.0).expect("identity is elliptic")
    }

    pub fn scalar(s: f64) -> Result<Self> {
        Self::from_fn(format!("{s}*I"), s, s, move |_| scalar_matrix(s))
    }

    /// Constant symmetric matrix; bounds are its extreme eigenvalues.
    pub fn constant(dim: usize, m: Mat3) -> Result<Self> {
        let (lo, hi) = eigen_bounds(&m, dim);
        Self::from_fn("constant", lo, hi, move |_| m)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn sample(&self, x: &Point) -> Mat3 {
        (self.eval)(x)
    }

    /// Element value of `A` (barycenter sample).
    pub fn element_matrix(&self, mesh: &Triangulation, t: usize) -> Result<Mat3> {
        let a = match &self.cells {
            Some(table) if table.mesh_id != mesh.id() => {
                return Err(Error::IncompatibleOperands(
                    "piecewise coefficient defined on another mesh".into(),
                ))
            }
            Some(table) => table.values[t],
            None => self.sample(&mesh.barycenter(t)),
        };
        if a.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(Some(t), "coefficient is not finite"));
        }
        Ok(a)
    }

    /// Check symmetry and the ellipticity certificate on every element sample.
    pub fn certify(&self, mesh: &Triangulation) -> Result<()> {
        let n = mesh.dim();
        for t in 0..mesh.num_cells() {
            let a = self.element_matrix(mesh, t)?;
            let scale = self.upper.max(1.0);
            for i in 0..n {
                for j in 0..n {
                    if (a[i][j] - a[j][i]).abs() > 1e-12 * scale {
                        return Err(Error::invalid(Some(t), "coefficient is not symmetric"));
                    }
                }
            }
            let (lo, hi) = eigen_bounds(&a, n);
            if lo < self.lower * (1.0 - 1e-12) || hi > self.upper * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    Some(t),
                    format!(
                        "eigenvalues [{lo}, {hi}] outside certified range [{}, {}]",
                        self.lower, self.upper
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// Smallest and largest eigenvalue of the leading `dim × dim` block.
pub fn eigen_bounds(a: &Mat3, dim: usize) -> (f64, f64) {
    let ev: Vec<f64> = if dim == 2 {
        Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        Matrix3::new(
            a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2], a[2][0], a[2][1], a[2][2],
        )
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect()
    };
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    #[test]
    fn certificates() {
        let m = Triangulation::kuhn(2, 2, BoxDomain::unit()).unwrap();
        CoefficientField::identity().certify(&m).unwrap();
        let a = CoefficientField::constant(2, [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3]]).unwrap();
        assert_eq!((a.lower(), a.upper()), (1.0, 2.0));
        a.certify(&m).unwrap();
        let wrong = CoefficientField::scalar_fn("bad", 1.0, 2.0, |x| 1.0 + 5.0 * x[0]).unwrap();
        assert!(wrong.certify(&m).is_err());
        assert!(CoefficientField::scalar(-1.0).is_err());
    }
}
