//! Conforming simplicial meshes: construction, geometric queries and audits.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{
    barycentric, barycentric_gradients, diameter, dist, inradius, point_simplex_distance,
    signed_volume, simplex_simplex_distance, Point,
};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Self {
        BoxDomain { lo, hi }
    }

    pub fn unit() -> Self {
        BoxDomain::new([0.0; 3], [1.0; 3])
    }

    /// The cube `(a, b)^n`.
    pub fn cube(a: f64, b: f64) -> Self {
        BoxDomain::new([a; 3], [b; 3])
    }
}

/// Cached per-element geometry.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub volume: f64,
    pub diameter: f64,
    pub inradius: f64,
    /// Gradients of the barycentric coordinates (local Lagrange basis gradients).
    pub grads: [Point; 4],
}

/// Read-only view of a mesh node.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: usize,
    pub coords: Point,
    pub on_boundary: bool,
}

/// Read-only view of a mesh simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    pub id: usize,
    pub vertices: Vec<usize>,
    pub refinement_edge: (usize, usize),
    pub volume: f64,
    pub diameter: f64,
    pub inradius: f64,
}

/// Query seed for [`Triangulation::neighborhood`].
#[derive(Clone, Copy, Debug)]
pub enum Seed<'a> {
    Node(usize),
    Elements(&'a [usize]),
    Ball { center: Point, radius: f64 },
}

#[derive(Clone, Debug)]
pub struct ShapeRegularity {
    pub per_element: Vec<f64>,
    pub gamma: f64,
}

/// Measured constants of `Ω(B(x0,R)) ⊂ B(x0,QR)` and `B(x0,κR) ∩ Ω ⊂ Ω'(B(x0,R))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborhoodConstants {
    pub q: f64,
    pub kappa: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InvertedElement { element: usize, volume: f64 },
    DuplicateNodes { first: usize, second: usize },
    HangingNode { node: usize, element: usize },
    OverlappingNode { node: usize, element: usize },
    FaceMismatch { element: usize, facet: Vec<usize> },
    DanglingVertex { element: usize, vertex: usize },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConformityReport {
    pub violations: Vec<Violation>,
}

impl ConformityReport {
    pub fn is_conforming(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Conforming simplicial triangulation in two or three dimensions.
///
/// Elements are stored positively oriented. The vertex order used by newest
/// vertex bisection is kept separately together with the bisection tag.
#[derive(Clone, Debug)]
pub struct Triangulation {
    id: u64,
    dim: usize,
    coords: Vec<Point>,
    cells: Vec<[usize; 4]>,
    refine_order: Vec<[usize; 4]>,
    refine_tag: Vec<u8>,
    geometry: Vec<CellGeometry>,
    node_offsets: Vec<usize>,
    node_cells: Vec<usize>,
    boundary_node: Vec<bool>,
    boundary_facets: Vec<Vec<usize>>,
    grid: OnceLock<ElementGrid>,
}

pub(crate) fn degeneracy_tolerance(h: f64, n: usize) -> f64 {
    1e-14 * h.powi(n as i32)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

fn facet_key(cell: &[usize], skip: usize) -> [usize; 3] {
    let mut k = [usize::MAX; 3];
    let mut m = 0;
    for (i, &v) in cell.iter().enumerate() {
        if i != skip {
            k[m] = v;
            m += 1;
        }
    }
    k[..m].sort_unstable();
    k
}

impl Triangulation {
    /// Build a mesh from node coordinates and element connectivity.
    ///
    /// Element orientation is normalised; the given vertex order becomes the
    /// bisection order with the default tag `n`.
    pub fn new(dim: usize, coords: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self> {
        check_dim(dim)?;
        let mut order = Vec::with_capacity(cells.len());
        for (t, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(Error::invalid(
                    Some(t),
                    format!("element has {} vertices, expected {}", c.len(), dim + 1),
                ));
            }
            let mut o = [usize::MAX; 4];
            for (k, &v) in c.iter().enumerate() {
                if v >= coords.len() {
                    return Err(Error::invalid(Some(t), format!("vertex id {v} out of range")));
                }
                o[k] = v;
            }
            order.push(o);
        }
        let tags = vec![dim as u8; order.len()];
        Self::from_refinement(dim, coords, order, tags)
    }

    pub(crate) fn from_refinement(
        dim: usize,
        coords: Vec<Point>,
        refine_order: Vec<[usize; 4]>,
        refine_tag: Vec<u8>,
    ) -> Result<Self> {
        check_dim(dim)?;
        if let Some(i) = coords.iter().position(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid(None, format!("node {i} has non-finite coordinates")));
        }
        let mut cells = Vec::with_capacity(refine_order.len());
        let mut geometry = Vec::with_capacity(refine_order.len());
        for (t, o) in refine_order.iter().enumerate() {
            let mut c = *o;
            let mut pts = [[0.0; 3]; 4];
            for k in 0..=dim {
                pts[k] = coords[c[k]];
            }
            let h = diameter(&pts[..=dim]);
            let mut vol = signed_volume(&pts[..=dim], dim);
            let tol = degeneracy_tolerance(h, dim);
            if vol.abs() <= tol {
                return Err(Error::DegenerateElement {
                    element: t,
                    volume: vol.abs(),
                    tolerance: tol,
                });
            }
            if vol < 0.0 {
                c.swap(0, 1);
                pts.swap(0, 1);
                vol = -vol;
            }
            cells.push(c);
            geometry.push(CellGeometry {
                volume: vol,
                diameter: h,
                inradius: inradius(&pts[..=dim], dim),
                grads: barycentric_gradients(&pts[..=dim], dim),
            });
        }

        let nn = coords.len();
        let mut counts = vec![0usize; nn + 1];
        for c in &cells {
            for &v in &c[..=dim] {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nn {
            counts[i + 1] += counts[i];
        }
        let node_offsets = counts.clone();
        let mut fill = counts;
        let mut node_cells = vec![0; node_offsets[nn]];
        for (t, c) in cells.iter().enumerate() {
            for &v in &c[..=dim] {
                node_cells[fill[v]] = t;
                fill[v] += 1;
            }
        }

        let mut facets: HashMap<[usize; 3], (u32, usize, usize)> = HashMap::new();
        for (t, c) in cells.iter().enumerate() {
            for skip in 0..=dim {
                let e = facets.entry(facet_key(&c[..=dim], skip)).or_insert((0, t, skip));
                e.0 += 1;
            }
        }
        let mut boundary_node = vec![false; nn];
        let mut boundary_facets: Vec<Vec<usize>> = facets
            .iter()
            .filter(|(_, v)| v.0 == 1)
            .map(|(k, _)| k[..dim].to_vec())
            .collect();
        boundary_facets.sort_unstable();
        for f in &boundary_facets {
            for &v in f {
                boundary_node[v] = true;
            }
        }

        Ok(Triangulation {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            coords,
            cells,
            refine_order,
            refine_tag,
            geometry,
            node_offsets,
            node_cells,
            boundary_node,
            boundary_facets,
            grid: OnceLock::new(),
        })
    }

    /// Kuhn triangulation of a box: every cell is split into `n!` simplices
    /// along the monotone lattice paths from its lower to its upper corner.
    pub fn kuhn(dim: usize, cells_per_side: usize, domain: BoxDomain) -> Result<Self> {
        check_dim(dim)?;
        if cells_per_side == 0 {
            return Err(Error::Geometry("cells_per_side must be positive".into()));
        }
        for k in 0..dim {
            if !(domain.hi[k] > domain.lo[k]) {
                return Err(Error::Geometry(format!("degenerate box along axis {k}")));
            }
        }
        let m = cells_per_side;
        let np = m + 1;
        let nz = if dim == 3 { np } else { 1 };
        let idx = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        let mut coords = Vec::with_capacity(np * np * nz);
        for k in 0..nz {
            for j in 0..np {
                for i in 0..np {
                    let t = [i as f64 / m as f64, j as f64 / m as f64, k as f64 / m as f64];
                    let mut p = [0.0; 3];
                    for a in 0..dim {
                        p[a] = domain.lo[a] + t[a] * (domain.hi[a] - domain.lo[a]);
                    }
                    coords.push(p);
                }
            }
        }
        let perms: Vec<Vec<usize>> = if dim == 2 {
            vec![vec![0, 1], vec![1, 0]]
        } else {
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0],
            ]
        };
        let mz = if dim == 3 { m } else { 1 };
        let mut order = Vec::new();
        for k in 0..mz {
            for j in 0..m {
                for i in 0..m {
                    for p in &perms {
                        let mut cur = [i, j, k];
                        let mut o = [usize::MAX; 4];
                        o[0] = idx(cur[0], cur[1], cur[2]);
                        for (s, &axis) in p.iter().enumerate() {
                            cur[axis] += 1;
                            o[s + 1] = idx(cur[0], cur[1], cur[2]);
                        }
                        order.push(o);
                    }
                }
            }
        }
        let tags = vec![dim as u8; order.len()];
        Self::from_refinement(dim, coords, order, tags)
    }

    /// Process-unique identifier used to detect operands from different meshes.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn point(&self, i: usize) -> &Point {
        &self.coords[i]
    }

    /// Vertices of element `t` (positively oriented).
    pub fn cell(&self, t: usize) -> &[usize] {
        &self.cells[t][..=self.dim]
    }

    pub fn cell_points(&self, t: usize) -> [Point; 4] {
        let mut p = [[0.0; 3]; 4];
        for (k, &v) in self.cell(t).iter().enumerate() {
            p[k] = self.coords[v];
        }
        p
    }

    pub fn geometry(&self, t: usize) -> &CellGeometry {
        &self.geometry[t]
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.geometry[t].volume
    }

    pub fn diameter(&self, t: usize) -> f64 {
        self.geometry[t].diameter
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let p = self.cell_points(t);
        crate::geometry::centroid(&p[..=self.dim])
    }

    /// Elements containing node `i` (the patch `P_i`).
    pub fn node_cells(&self, i: usize) -> &[usize] {
        &self.node_cells[self.node_offsets[i]..self.node_offsets[i + 1]]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary_node[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_node
    }

    pub fn boundary_facets(&self) -> &[Vec<usize>] {
        &self.boundary_facets
    }

    pub fn node(&self, i: usize) -> Node {
        Node {
            id: i,
            coords: self.coords[i],
            on_boundary: self.boundary_node[i],
        }
    }

    pub fn simplex(&self, t: usize) -> Simplex {
        let g = &self.geometry[t];
        Simplex {
            id: t,
            vertices: self.cell(t).to_vec(),
            refinement_edge: self.refinement_edge(t),
            volume: g.volume,
            diameter: g.diameter,
            inradius: g.inradius,
        }
    }

    /// Edge bisected next by newest vertex bisection.
    pub fn refinement_edge(&self, t: usize) -> (usize, usize) {
        let o = &self.refine_order[t];
        (o[0], o[self.refine_tag[t] as usize])
    }

    /// Vertices of element `t` in bisection order and its tag, the input expected
    /// by [`crate::refine::nvb_similarity_classes`].
    pub fn refinement_seed(&self, t: usize) -> (Vec<Point>, usize) {
        let o = self.refine_order[t];
        ((0..=self.dim).map(|k| self.coords[o[k]]).collect(), self.refine_tag[t] as usize)
    }

    pub(crate) fn refine_state(&self, t: usize) -> ([usize; 4], u8) {
        (self.refine_order[t], self.refine_tag[t])
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    pub fn h_max(&self) -> f64 {
        self.geometry.iter().fold(0.0, |a, g| a.max(g.diameter))
    }

    pub fn h_min(&self) -> f64 {
        self.geometry.iter().fold(f64::INFINITY, |a, g| a.min(g.diameter))
    }

    /// Largest element diameter among the elements containing node `i`.
    pub fn node_h(&self, i: usize) -> f64 {
        self.node_cells(i)
            .iter()
            .fold(0.0, |a, &t| a.max(self.geometry[t].diameter))
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.coords {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Per-element `Γ_T = h_T / R_{i,T}` and the mesh parameter `Γ = max Γ_T`.
    pub fn shape_regularity(&self) -> ShapeRegularity {
        let per_element: Vec<f64> = self
            .geometry
            .iter()
            .map(|g| g.diameter / g.inradius)
            .collect();
        let gamma = per_element.iter().cloned().fold(0.0, f64::max);
        ShapeRegularity { per_element, gamma }
    }

    pub fn gamma(&self) -> f64 {
        self.shape_regularity().gamma
    }

    /// Nodes connected to `i` by an edge, sorted, excluding `i`.
    pub fn node_neighbors(&self, i: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .node_cells(i)
            .iter()
            .flat_map(|&t| self.cell(t).iter().copied())
            .filter(|&j| j != i)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn patch(&self, i: usize) -> Vec<usize> {
        self.node_cells(i).to_vec()
    }

    /// `Ω(A)`: all elements whose closure meets `A`.
    pub fn neighborhood(&self, seed: Seed<'_>) -> Vec<usize> {
        match seed {
            Seed::Node(i) => self.patch(i),
            Seed::Elements(ts) => {
                let mut mark = vec![false; self.num_cells()];
                for &t in ts {
                    for &v in self.cell(t) {
                        for &s in self.node_cells(v) {
                            mark[s] = true;
                        }
                    }
                }
                (0..self.num_cells()).filter(|&s| mark[s]).collect()
            }
            Seed::Ball { center, radius } => self.cells_meeting_ball(&center, radius),
        }
    }

    /// `Ω'(B)`: union of the patches of all nodes in the closed ball.
    pub fn prime_neighborhood(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut mark = vec![false; self.num_cells()];
        for i in self.nodes_in_ball(center, radius) {
            for &t in self.node_cells(i) {
                mark[t] = true;
            }
        }
        (0..self.num_cells()).filter(|&t| mark[t]).collect()
    }

    pub fn nodes_in_ball(&self, center: &Point, radius: f64) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| dist(&self.coords[i], center) <= radius)
            .collect()
    }

    /// Elements whose closure meets the closed ball, by exact point–simplex distance.
    pub fn cells_meeting_ball(&self, center: &Point, radius: f64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .grid()
            .candidates(center, radius)
            .into_iter()
            .filter(|&t| {
                let p = self.cell_points(t);
                point_simplex_distance(center, &p[..=self.dim]) <= radius
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Element containing `x`, if any.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for t in self.grid().candidates(x, 0.0) {
            let p = self.cell_points(t);
            let l = barycentric(x, &p, &self.geometry[t].grads, self.dim);
            let m = l[..=self.dim].iter().cloned().fold(f64::INFINITY, f64::min);
            if m >= -1e-12 && best.map_or(true, |(bt, bm)| m > bm || (m == bm && t < bt)) {
                best = Some((t, m));
            }
        }
        best.map(|b| b.0)
    }

    fn grid(&self) -> &ElementGrid {
        self.grid.get_or_init(|| ElementGrid::build(self))
    }

    /// Sampled constants `Q` and `κ` over the given centers and radius multipliers.
    ///
    /// The radius is `factor · h_T` for the element `T` containing the center, so
    /// every sample satisfies `R ≥ h_T`.
    pub fn neighborhood_constants(
        &self,
        centers: &[Point],
        radius_factors: &[f64],
    ) -> NeighborhoodConstants {
        let mut q: f64 = 0.0;
        let mut kappa: f64 = 1.0;
        let mut samples = 0;
        for x0 in centers {
            let Some(t0) = self.locate(x0) else { continue };
            let h = self.diameter(t0);
            for &f in radius_factors {
                let r = f.max(1.0) * h;
                samples += 1;
                for t in self.cells_meeting_ball(x0, r) {
                    for &v in self.cell(t) {
                        q = q.max(dist(&self.coords[v], x0) / r);
                    }
                }
                let prime = self.prime_neighborhood(x0, r);
                let mut inside = vec![false; self.num_cells()];
                for &t in &prime {
                    inside[t] = true;
                }
                for t in 0..self.num_cells() {
                    if !inside[t] {
                        let p = self.cell_points(t);
                        kappa = kappa.min(point_simplex_distance(x0, &p[..=self.dim]) / r);
                    }
                }
            }
        }
        NeighborhoodConstants { q, kappa, samples }
    }

    /// `max h_T / h_S` over pairs of elements sharing at least a vertex.
    pub fn intersection_ratio(&self) -> f64 {
        let mut worst: f64 = 1.0;
        for i in 0..self.num_nodes() {
            let cells = self.node_cells(i);
            let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
            for &t in cells {
                lo = lo.min(self.diameter(t));
                hi = hi.max(self.diameter(t));
            }
            if !cells.is_empty() {
                worst = worst.max(hi / lo);
            }
        }
        worst
    }

    /// `min_T dist(T, Ω \ Ω(T)) / h_T` over elements whose neighbourhood is not the whole mesh.
    pub fn patch_separation(&self) -> Option<f64> {
        let n = self.dim;
        let mut best: Option<f64> = None;
        for t in 0..self.num_cells() {
            let ring1 = self.neighborhood(Seed::Elements(&[t]));
            let ring2 = self.neighborhood(Seed::Elements(&ring1));
            let mut in1 = HashMap::with_capacity(ring1.len());
            for &s in &ring1 {
                in1.insert(s, ());
            }
            let pt = self.cell_points(t);
            let mut d = f64::INFINITY;
            for &s in &ring2 {
                if in1.contains_key(&s) {
                    continue;
                }
                let ps = self.cell_points(s);
                d = d.min(simplex_simplex_distance(&pt[..=n], &ps[..=n], n));
            }
            if d.is_finite() {
                let r = d / self.diameter(t);
                best = Some(best.map_or(r, |b: f64| b.min(r)));
            }
        }
        best
    }

    /// Conformity audit of this mesh.
    pub fn validate(&self) -> ConformityReport {
        let cells: Vec<Vec<usize>> = (0..self.num_cells()).map(|t| self.cell(t).to_vec()).collect();
        validate_conformity(self.dim, &self.coords, &cells)
    }
}

/// `Γ_T` of a single simplex given by its vertices.
pub fn simplex_gamma(pts: &[Point], dim: usize) -> Result<f64> {
    check_dim(dim)?;
    let h = diameter(pts);
    let vol = signed_volume(pts, dim).abs();
    let tol = degeneracy_tolerance(h, dim);
    if vol <= tol {
        return Err(Error::DegenerateElement {
            element: 0,
            volume: vol,
            tolerance: tol,
        });
    }
    Ok(h / inradius(pts, dim))
}

/// Conformity audit on raw mesh data (orientation is not normalised).
///
/// Reports inverted or degenerate elements, duplicate nodes, nodes lying on or
/// inside elements they do not belong to, and facets that are shared by more
/// than two elements or are unmatched although the mesh continues behind them.
pub fn validate_conformity(dim: usize, coords: &[Point], cells: &[Vec<usize>]) -> ConformityReport {
    let mut violations = Vec::new();
    let mut geo: Vec<Option<([Point; 4], [Point; 4])>> = vec![None; cells.len()];
    for (t, c) in cells.iter().enumerate() {
        if let Some(&v) = c.iter().find(|&&v| v >= coords.len()) {
            violations.push(Violation::DanglingVertex { element: t, vertex: v });
            continue;
        }
        let mut pts = [[0.0; 3]; 4];
        for (k, &v) in c.iter().enumerate() {
            pts[k] = coords[v];
        }
        let h = diameter(&pts[..=dim]);
        let vol = signed_volume(&pts[..=dim], dim);
        if vol <= degeneracy_tolerance(h, dim) {
            violations.push(Violation::InvertedElement { element: t, volume: vol });
            if vol.abs() <= degeneracy_tolerance(h, dim) {
                continue;
            }
        }
        geo[t] = Some((pts, barycentric_gradients(&pts[..=dim], dim)));
    }

    let (lo, hi) = coords.iter().fold(
        ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]),
        |(mut lo, mut hi), p| {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
            (lo, hi)
        },
    );
    let scale = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-10 * scale;
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in coords.iter().enumerate() {
        let key = [
            (p[0] / tol).round() as i64,
            (p[1] / tol).round() as i64,
            (p[2] / tol).round() as i64,
        ];
        let mut dup = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(list) = buckets.get(&[key[0] + dx, key[1] + dy, key[2] + dz]) {
                        if let Some(&j) = list.iter().find(|&&j| dist(&coords[j], p) <= tol) {
                            dup = Some(j);
                            break 'search;
                        }
                    }
                }
            }
        }
        if let Some(j) = dup {
            violations.push(Violation::DuplicateNodes { first: j, second: i });
        }
        buckets.entry(key).or_default().push(i);
    }

    let valid: Vec<usize> = (0..cells.len()).filter(|&t| geo[t].is_some()).collect();
    let grid = ElementGrid::from_boxes(
        valid.iter().map(|&t| {
            let (p, _) = geo[t].as_ref().unwrap();
            (t, bbox(&p[..=dim]))
        }),
        dim,
    );
    let inside = |x: &Point, t: usize, slack: f64| -> Option<f64> {
        let (p, g) = geo[t].as_ref()?;
        let l = barycentric(x, p, g, dim);
        let m = l[..=dim].iter().cloned().fold(f64::INFINITY, f64::min);
        (m >= -slack).then_some(m)
    };

    for (i, p) in coords.iter().enumerate() {
        for t in grid.candidates(p, 0.0) {
            if cells[t].contains(&i) {
                continue;
            }
            if let Some(m) = inside(p, t, 1e-10) {
                if m > 1e-10 {
                    violations.push(Violation::OverlappingNode { node: i, element: t });
                } else {
                    violations.push(Violation::HangingNode { node: i, element: t });
                }
            }
        }
    }

    let mut facets: HashMap<[usize; 3], Vec<(usize, usize)>> = HashMap::new();
    for &t in &valid {
        for skip in 0..=dim {
            facets.entry(facet_key(&cells[t], skip)).or_default().push((t, skip));
        }
    }
    let mut keys: Vec<&[usize; 3]> = facets.keys().collect();
    keys.sort_unstable();
    for key in keys {
        let owners = &facets[key];
        let facet = key[..dim].to_vec();
        if owners.len() > 2 {
            violations.push(Violation::FaceMismatch { element: owners[0].0, facet });
            continue;
        }
        if owners.len() == 1 {
            let (t, skip) = owners[0];
            let (pts, _) = geo[t].as_ref().unwrap();
            let fpts: Vec<Point> = (0..=dim).filter(|&k| k != skip).map(|k| pts[k]).collect();
            let c = crate::geometry::centroid(&fpts);
            let opp = pts[skip];
            let h = diameter(&pts[..=dim]);
            let dir = crate::geometry::sub(&c, &opp);
            let len = crate::geometry::norm(&dir);
            let probe = crate::geometry::add(&c, &crate::geometry::scale(&dir, 1e-7 * h / len));
            let hit = grid
                .candidates(&probe, 0.0)
                .into_iter()
                .any(|s| s != t && inside(&probe, s, 0.0).is_some());
            if hit {
                violations.push(Violation::FaceMismatch { element: t, facet });
            }
        }
    }
    ConformityReport { violations }
}

fn bbox(pts: &[Point]) -> (Point, Point) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Uniform bucket grid over element bounding boxes.
#[derive(Clone, Debug)]
struct ElementGrid {
    lo: Point,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
    boxes: Vec<(Point, Point)>,
}

impl ElementGrid {
    fn build(mesh: &Triangulation) -> Self {
        let n = mesh.dim;
        Self::from_boxes(
            (0..mesh.num_cells()).map(|t| (t, bbox(&mesh.cell_points(t)[..=n]))),
            n,
        )
    }

    fn from_boxes(items: impl Iterator<Item = (usize, (Point, Point))>, dim: usize) -> Self {
        let items: Vec<(usize, (Point, Point))> = items.collect();
        let count = items.iter().map(|x| x.0 + 1).max().unwrap_or(0);
        let mut boxes = vec![([0.0; 3], [0.0; 3]); count];
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut mean_size = 0.0;
        for (t, (a, b)) in &items {
            boxes[*t] = (*a, *b);
            for k in 0..dim {
                lo[k] = lo[k].min(a[k]);
                hi[k] = hi[k].max(b[k]);
            }
            mean_size += (0..dim).map(|k| b[k] - a[k]).fold(0.0, f64::max);
        }
        for k in dim..3 {
            lo[k] = 0.0;
            hi[k] = 0.0;
        }
        if items.is_empty() {
            return ElementGrid {
                lo: [0.0; 3],
                cell: 1.0,
                dims: [1, 1, 1],
                buckets: vec![Vec::new()],
                boxes,
            };
        }
        mean_size /= items.len() as f64;
        let extent = (0..dim).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        let max_per_axis = if dim == 2 { 512.0 } else { 64.0 };
        let cell = mean_size.max(extent / max_per_axis).max(1e-300);
        let mut dims = [1usize; 3];
        for k in 0..dim {
            dims[k] = (((hi[k] - lo[k]) / cell).floor() as usize + 1).max(1);
        }
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let mut g = ElementGrid {
            lo,
            cell,
            dims,
            buckets: Vec::new(),
            boxes,
        };
        for (t, (a, b)) in &items {
            let (i0, i1) = (g.index_range(a), g.index_range(b));
            for z in i0[2]..=i1[2] {
                for y in i0[1]..=i1[1] {
                    for x in i0[0]..=i1[0] {
                        buckets[x + dims[0] * (y + dims[1] * z)].push(*t as u32);
                    }
                }
            }
        }
        g.buckets = buckets;
        g
    }

    fn index_range(&self, p: &Point) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let v = ((p[k] - self.lo[k]) / self.cell).floor();
            idx[k] = if v <= 0.0 {
                0
            } else {
                (v as usize).min(self.dims[k] - 1)
            };
        }
        idx
    }

    /// Elements whose bounding box meets the cube of half-width `r` around `x`.
    fn candidates(&self, x: &Point, r: f64) -> Vec<usize> {
        let a = [x[0] - r, x[1] - r, x[2] - r];
        let b = [x[0] + r, x[1] + r, x[2] + r];
        let (i0, i1) = (self.index_range(&a), self.index_range(&b));
        let mut out = Vec::new();
        for z in i0[2]..=i1[2] {
            for y in i0[1]..=i1[1] {
                for xi in i0[0]..=i1[0] {
                    for &t in &self.buckets[xi + self.dims[0] * (y + self.dims[1] * z)] {
                        let (lo, hi) = &self.boxes[t as usize];
                        let hit = (0..3).all(|k| lo[k] <= b[k] + 1e-12 * self.cell && hi[k] >= a[k] - 1e-12 * self.cell);
                        if hit {
                            out.push(t as usize);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kuhn_counts() {
        let m = Triangulation::kuhn(2, 1, BoxDomain::unit()).unwrap();
        assert_eq!((m.num_cells(), m.num_nodes()), (2, 4));
        let m = Triangulation::kuhn(3, 1, BoxDomain::unit()).unwrap();
        assert_eq!((m.num_cells(), m.num_nodes()), (6, 8));
        let m = Triangulation::kuhn(2, 2, BoxDomain::unit()).unwrap();
        assert_eq!((m.num_cells(), m.num_nodes()), (8, 9));
        assert!((m.total_volume() - 1.0).abs() < 1e-14);
        assert_eq!(m.boundary_flags().iter().filter(|&&b| b).count(), 8);
    }

    #[test]
    fn unsupported_dimension() {
        assert!(matches!(
            Triangulation::kuhn(4, 1, BoxDomain::unit()),
            Err(Error::UnsupportedDimension(4))
        ));
    }

    #[test]
    fn closed_form_gammas() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let g = simplex_gamma(&tri, 2).unwrap();
        assert!((g - (2.0 + 2.0 * 2f64.sqrt())).abs() < 1e-12);
        let eq = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 3f64.sqrt() / 2.0, 0.0]];
        assert!((simplex_gamma(&eq, 2).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        let s = 1.0 / 2f64.sqrt();
        let tet = [[s, 0.0, -0.5], [-s, 0.0, -0.5], [0.0, s, 0.5], [0.0, -s, 0.5]];
        let h = dist(&tet[0], &tet[1]);
        let tet: Vec<Point> = tet.iter().map(|p| crate::geometry::scale(p, 1.0 / h)).collect();
        assert!((simplex_gamma(&tet, 3).unwrap() - 2.0 * 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_is_rejected() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(simplex_gamma(&pts, 2), Err(Error::DegenerateElement { .. })));
        let r = Triangulation::new(2, pts.to_vec(), vec![vec![0, 1, 2]]);
        assert!(matches!(r, Err(Error::DegenerateElement { element: 0, .. })));
    }

    #[test]
    fn patches_and_balls() {
        let m = Triangulation::kuhn(2, 1, BoxDomain::unit()).unwrap();
        assert_eq!(m.patch(0).len(), 2);
        assert_eq!(m.patch(1).len(), 1);
        let all = m.neighborhood(Seed::Ball { center: [0.5, 0.5, 0.0], radius: 2f64.sqrt() });
        assert_eq!(all, vec![0, 1]);
        let none = m.neighborhood(Seed::Ball { center: [5.0, 5.0, 0.0], radius: 0.1 });
        assert!(none.is_empty());
    }

    #[test]
    fn locate_points() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        for &x in &[[0.1, 0.7, 0.0], [0.99, 0.01, 0.0], [0.5, 0.5, 0.0]] {
            let t = m.locate(&x).unwrap();
            let p = m.cell_points(t);
            assert!(point_simplex_distance(&x, &p[..3]) < 1e-14);
        }
        assert!(m.locate(&[1.5, 0.5, 0.0]).is_none());
    }

    #[test]
    fn conformity_defects() {
        let m = Triangulation::kuhn(2, 3, BoxDomain::unit()).unwrap();
        assert!(m.validate().is_conforming());
        let m3 = Triangulation::kuhn(3, 2, BoxDomain::unit()).unwrap();
        assert!(m3.validate().is_conforming());

        let coords: Vec<Point> = m.coords().to_vec();
        let mut cells: Vec<Vec<usize>> = (0..m.num_cells()).map(|t| m.cell(t).to_vec()).collect();
        cells[4].swap(0, 1);
        let r = validate_conformity(2, &coords, &cells);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::InvertedElement { element: 4, .. })));

        // split one triangle at the midpoint of its edge shared with a neighbour
        let coords = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.5, 0.5, 0.0],
        ];
        let cells = vec![vec![0, 1, 4], vec![1, 2, 4], vec![0, 2, 3]];
        let r = validate_conformity(2, &coords, &cells);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::HangingNode { node: 4, element: 2 })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::FaceMismatch { .. })));

        let mut coords = m.coords().to_vec();
        coords.push(coords[5]);
        let cells: Vec<Vec<usize>> = (0..m.num_cells()).map(|t| m.cell(t).to_vec()).collect();
        let r = validate_conformity(2, &coords, &cells);
        assert!(r.violations.contains(&Violation::DuplicateNodes { first: 5, second: 16 }));
    }

    #[test]
    fn comparability_and_separation() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        assert!((m.intersection_ratio() - 1.0).abs() < 1e-14);
        let sep = m.patch_separation().unwrap();
        assert!(sep > 0.3 && sep < 1.0, "{sep}");
    }
}
