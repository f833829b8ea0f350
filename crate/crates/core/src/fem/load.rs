use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{norm, Point};
use crate::integrate::order2_rule;
use crate::mesh::Triangulation;

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// Right-hand side `f - div F`, an optional dominating field `G` and the
/// integrability gap `δ` fixing `1/p = 1/n - δ/n` and `1/q = 2/n - δ/n`.
///
/// `f` is integrated with an order-two rule; `F` and `G` are read at element
/// barycenters, which is exact for fields that are constant on elements.
#[derive(Clone)]
pub struct LoadData {
    pub f: ScalarFn,
    pub flux: VectorFn,
    pub dominating: Option<VectorFn>,
    delta: f64,
}

impl fmt::Debug for LoadData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadData")
            .field("delta", &self.delta)
            .field("has_dominating", &self.dominating.is_some())
            .finish()
    }
}

impl LoadData {
    pub fn new(
        f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
        flux: impl Fn(&Point) -> Point + Send + Sync + 'static,
        delta: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(None, format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(LoadData {
            f: Arc::new(f),
            flux: Arc::new(flux),
            dominating: None,
            delta,
        })
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_| [0.0; 3], 0.5).expect("valid delta")
    }

    pub fn source(f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(f, |_| [0.0; 3], 0.5).expect("valid delta")
    }

    pub fn with_dominating(mut self, g: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        self.dominating = Some(Arc::new(g));
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(None, format!("delta must lie in (0, 1), got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self, n: usize) -> f64 {
        n as f64 / (1.0 - self.delta)
    }

    pub fn q(&self, n: usize) -> f64 {
        n as f64 / (2.0 - self.delta)
    }

    /// Sobolev exponent `2n/(n-2)`; in two dimensions the fixed surrogate 8.
    pub fn two_star(n: usize) -> f64 {
        if n == 2 {
            8.0
        } else {
            2.0 * n as f64 / (n as f64 - 2.0)
        }
    }

    /// Data for truncated subsolutions: source `|f|` and flux `G`
    /// (or `F` itself when no dominating field is given).
    pub fn truncation_data(&self) -> LoadData {
        let f = self.f.clone();
        let g = self.dominating.clone().unwrap_or_else(|| self.flux.clone());
        LoadData {
            f: Arc::new(move |x| f(x).abs()),
            flux: g.clone(),
            dominating: Some(g),
            delta: self.delta,
        }
    }

    pub fn f_norm_q(&self, mesh: &Triangulation) -> f64 {
        scalar_lp_norm(mesh, &*self.f, self.q(mesh.dim()))
    }

    /// `‖f‖_{L^q}` over the cells with `cells[t]` set.
    pub fn f_norm_q_on(&self, mesh: &Triangulation, cells: &[bool]) -> f64 {
        masked_scalar_norm(mesh, &*self.f, self.q(mesh.dim()), Some(cells))
    }

    /// `‖G‖_{L^p}` (or `‖F‖_{L^p}`) over the cells with `cells[t]` set.
    pub fn dominating_norm_p_on(&self, mesh: &Triangulation, cells: &[bool]) -> f64 {
        let g = self.dominating.as_ref().unwrap_or(&self.flux);
        masked_vector_norm(mesh, &**g, self.p(mesh.dim()), Some(cells))
    }

    pub fn flux_norm_p(&self, mesh: &Triangulation) -> f64 {
        vector_lp_norm(mesh, &*self.flux, self.p(mesh.dim()))
    }

    /// `‖G‖_{L^p}`, or `‖F‖_{L^p}` without a dominating field.
    pub fn dominating_norm_p(&self, mesh: &Triangulation) -> f64 {
        match &self.dominating {
            Some(g) => vector_lp_norm(mesh, &**g, self.p(mesh.dim())),
            None => self.flux_norm_p(mesh),
        }
    }
}

fn quadrature_points(mesh: &Triangulation, t: usize) -> (Vec<Point>, f64) {
    let n = mesh.dim();
    let (bary, w) = order2_rule(n);
    let p = mesh.cell_points(t);
    let pts = bary
        .iter()
        .map(|l| {
            let mut x = [0.0; 3];
            for k in 0..=n {
                for a in 0..3 {
                    x[a] += l[k] * p[k][a];
                }
            }
            x
        })
        .collect();
    (pts, w)
}

pub fn scalar_lp_norm(mesh: &Triangulation, f: &(dyn Fn(&Point) -> f64 + Send + Sync), p: f64) -> f64 {
    masked_scalar_norm(mesh, f, p, None)
}

fn masked_scalar_norm(
    mesh: &Triangulation,
    f: &(dyn Fn(&Point) -> f64 + Send + Sync),
    p: f64,
    cells: Option<&[bool]>,
) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.num_cells() {
        if cells.is_some_and(|c| !c[t]) {
            continue;
        }
        let (pts, w) = quadrature_points(mesh, t);
        s += mesh.volume(t) * w * pts.iter().map(|x| f(x).abs().powf(p)).sum::<f64>();
    }
    s.powf(1.0 / p)
}

pub fn vector_lp_norm(mesh: &Triangulation, g: &(dyn Fn(&Point) -> Point + Send + Sync), p: f64) -> f64 {
    masked_vector_norm(mesh, g, p, None)
}

fn masked_vector_norm(
    mesh: &Triangulation,
    g: &(dyn Fn(&Point) -> Point + Send + Sync),
    p: f64,
    cells: Option<&[bool]>,
) -> f64 {
    let mut s = 0.0;
    for t in 0..mesh.num_cells() {
        if cells.is_some_and(|c| !c[t]) {
            continue;
        }
        s += mesh.volume(t) * norm(&g(&mesh.barycenter(t))).powf(p);
    }
    s.powf(1.0 / p)
}

pub(crate) fn quadrature(mesh: &Triangulation, t: usize) -> (Vec<Point>, f64) {
    quadrature_points(mesh, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;

    #[test]
    fn exponents() {
        let l = LoadData::zero().with_delta(0.5).unwrap();
        assert_eq!(l.p(2), 4.0);
        assert!((l.q(3) - 2.0).abs() < 1e-15);
        assert_eq!(LoadData::two_star(2), 8.0);
        assert_eq!(LoadData::two_star(3), 6.0);
        assert!(LoadData::zero().with_delta(1.0).is_err());
    }

    #[test]
    fn norms_of_constants() {
        let m = Triangulation::kuhn(2, 3, BoxDomain::cube(0.0, 2.0)).unwrap();
        let l = LoadData::new(|_| 3.0, |_| [0.0, 2.0, 0.0], 0.5).unwrap();
        // |Ω| = 4
        assert!((l.f_norm_q(&m) - 3.0 * 4f64.powf(1.0 / l.q(2))).abs() < 1e-12);
        assert!((l.flux_norm_p(&m) - 2.0 * 4f64.powf(1.0 / l.p(2))).abs() < 1e-12);
        let half: Vec<bool> = (0..m.num_cells()).map(|t| m.barycenter(t)[0] < 1.0).collect();
        assert!((l.f_norm_q_on(&m, &half) - 3.0 * 2f64.powf(1.0 / l.q(2))).abs() < 1e-12);
        assert!((l.dominating_norm_p_on(&m, &half) - 2.0 * 2f64.powf(1.0 / l.p(2))).abs() < 1e-12);
    }
}
