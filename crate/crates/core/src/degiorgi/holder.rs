//! Sampled Hölder seminorms of P1 functions.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::geometry::{centroid, dist, Point};
use crate::mesh::Triangulation;
use crate::par::{max_indexed, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HolderMode {
    /// Interior nodes only; barycenters of elements without boundary vertices.
    Interior,
    /// All nodes and barycenters.
    Global,
}

struct Samples {
    x: Vec<Point>,
    v: Vec<f64>,
}

fn node_samples(mesh: &Triangulation, u: &FeFunction, mode: HolderMode) -> Samples {
    let keep: Vec<usize> = (0..mesh.num_nodes())
        .filter(|&i| mode == HolderMode::Global || !mesh.is_boundary(i))
        .collect();
    Samples {
        x: keep.iter().map(|&i| *mesh.point(i)).collect(),
        v: keep.iter().map(|&i| u.values()[i]).collect(),
    }
}

fn quotient(du: f64, d: f64, alpha: f64) -> f64 {
    if d > 0.0 {
        du.abs() / d.powf(alpha)
    } else {
        0.0
    }
}

/// Largest quotient over the vertex pairs of one element and over its barycenter
/// paired with each vertex.
fn element_pairs(mesh: &Triangulation, u: &FeFunction, alpha: f64, mode: HolderMode, t: usize) -> f64 {
    let cell = mesh.cell(t);
    if mode == HolderMode::Interior && cell.iter().any(|&i| mesh.is_boundary(i)) {
        return 0.0;
    }
    let vals = u.values();
    let p: Vec<Point> = cell.iter().map(|&i| *mesh.point(i)).collect();
    let c = centroid(&p);
    let vc = cell.iter().map(|&i| vals[i]).sum::<f64>() / cell.len() as f64;
    let mut best = 0.0f64;
    for a in 0..cell.len() {
        best = best.max(quotient(vals[cell[a]] - vc, dist(&p[a], &c), alpha));
        for b in a + 1..cell.len() {
            best = best.max(quotient(vals[cell[a]] - vals[cell[b]], dist(&p[a], &p[b]), alpha));
        }
    }
    best
}

/// Lower estimate of `|u|_{C^α}` over node pairs and element barycenter–vertex pairs.
///
/// The node-pair supremum is exact; a box partition of the nodes bounds
/// `|u_i - u_j| / |x_i - x_j|^α` over whole boxes to skip them.
pub fn holder_seminorm(mesh: &Triangulation, u: &FeFunction, alpha: f64, mode: HolderMode) -> Result<f64> {
    holder_seminorm_with(mesh, u, alpha, mode, Execution::default())
}

pub fn holder_seminorm_with(
    mesh: &Triangulation,
    u: &FeFunction,
    alpha: f64,
    mode: HolderMode,
    exec: Execution,
) -> Result<f64> {
    u.check_mesh(mesh)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidOperand(format!("Hölder exponent {alpha} outside (0, 1]")));
    }
    let seed = max_indexed(exec, mesh.num_cells(), 0.0, |t| element_pairs(mesh, u, alpha, mode, t));
    let s = node_samples(mesh, u, mode);
    let m = s.x.len();
    if m < 2 {
        return Ok(seed);
    }
    let grid = BinGrid::new(&s, mesh.dim());
    let best = AtomicU64::new(seed.to_bits());
    max_indexed(exec, m, 0.0, |i| {
        let vi = s.v[i];
        let xi = s.x[i];
        let mut local = f64::from_bits(best.load(Ordering::Relaxed));
        for b in &grid.bins {
            let spread = (b.vmax - vi).max(vi - b.vmin);
            if spread <= 0.0 {
                continue;
            }
            let d = b.distance(&xi);
            if d > 0.0 && quotient(spread, d, alpha) <= local {
                continue;
            }
            for &j in &b.members {
                let q = quotient(vi - s.v[j], dist(&xi, &s.x[j]), alpha);
                if q > local {
                    local = q;
                }
            }
        }
        best.fetch_max(local.to_bits(), Ordering::Relaxed);
        local
    });
    Ok(f64::from_bits(best.load(Ordering::Relaxed)))
}

struct Bin {
    lo: Point,
    hi: Point,
    vmin: f64,
    vmax: f64,
    members: Vec<usize>,
}

impl Bin {
    fn distance(&self, x: &Point) -> f64 {
        let mut d2 = 0.0;
        for k in 0..3 {
            let e = (self.lo[k] - x[k]).max(x[k] - self.hi[k]).max(0.0);
            d2 += e * e;
        }
        d2.sqrt()
    }
}

/// Uniform box partition of the samples with per-box value ranges.
struct BinGrid {
    bins: Vec<Bin>,
}

impl BinGrid {
    fn new(s: &Samples, dim: usize) -> Self {
        let m = s.x.len();
        let per_side = ((m as f64 / 16.0).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in &s.x {
            for k in 0..dim {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        let key = |x: &Point| {
            let mut idx = 0;
            for k in (0..dim).rev() {
                let w = (hi[k] - lo[k]).max(f64::MIN_POSITIVE);
                let c = (((x[k] - lo[k]) / w * per_side as f64) as usize).min(per_side - 1);
                idx = idx * per_side + c;
            }
            idx
        };
        let mut bins: Vec<Bin> = (0..per_side.pow(dim as u32))
            .map(|_| Bin {
                lo: [f64::INFINITY; 3],
                hi: [f64::NEG_INFINITY; 3],
                vmin: f64::INFINITY,
                vmax: f64::NEG_INFINITY,
                members: Vec::new(),
            })
            .collect();
        for (j, x) in s.x.iter().enumerate() {
            let b = &mut bins[key(x)];
            for k in 0..3 {
                b.lo[k] = b.lo[k].min(x[k]);
                b.hi[k] = b.hi[k].max(x[k]);
            }
            b.vmin = b.vmin.min(s.v[j]);
            b.vmax = b.vmax.max(s.v[j]);
            b.members.push(j);
        }
        bins.retain(|b| !b.members.is_empty());
        BinGrid { bins }
    }
}

/// Brute-force reference over the same pairs.
pub fn holder_seminorm_naive(mesh: &Triangulation, u: &FeFunction, alpha: f64, mode: HolderMode) -> Result<f64> {
    u.check_mesh(mesh)?;
    let s = node_samples(mesh, u, mode);
    let mut best = (0..mesh.num_cells())
        .map(|t| element_pairs(mesh, u, alpha, mode, t))
        .fold(0.0, f64::max);
    for i in 0..s.x.len() {
        for j in i + 1..s.x.len() {
            best = best.max(quotient(s.v[i] - s.v[j], dist(&s.x[i], &s.x[j]), alpha));
        }
    }
    Ok(best)
}
