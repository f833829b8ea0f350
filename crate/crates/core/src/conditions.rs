//! Audits of the structural hypotheses: A-nonobtuse and uniformly A-acute meshes,
//! acute connection paths, discrete subsolutions and the dominating-flux assumption.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_rhs, element_matrices, gather_matrix, LocalMatrix};
use crate::fem::{
    assemble, nodal_max, CoefficientField, CsrMatrix, FeFunction, LoadData, StiffnessSystem,
};
use crate::geometry::{norm, Point};
use crate::mesh::Triangulation;
use crate::par::Execution;

pub const COUPLING_TOLERANCE: f64 = 1e-12;
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NonobtuseCertificate {
    pub pass: bool,
    /// `max_{i≠j} ∫_T A∇ψ_i·∇ψ_j` per element.
    pub worst_coupling: Vec<f64>,
    /// `(element, global i, global j)` with a coupling above the tolerance.
    pub offending: Vec<(usize, usize, usize)>,
}

impl fmt::Display for NonobtuseCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let worst = self.worst_coupling.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        writeln!(f, "nonobtuse: {}", self.pass)?;
        writeln!(f, "elements: {}", self.worst_coupling.len())?;
        writeln!(f, "max_coupling: {worst:e}")?;
        writeln!(f, "tolerance: {COUPLING_TOLERANCE:e}")?;
        writeln!(f, "offending_pairs: {}", self.offending.len())?;
        for (t, i, j) in self.offending.iter().take(20) {
            writeln!(f, "offending: element={t} i={i} j={j}")?;
        }
        Ok(())
    }
}

fn nonobtuse_from_locals(mesh: &Triangulation, locals: &[LocalMatrix]) -> NonobtuseCertificate {
    let n = mesh.dim();
    let mut worst_coupling = Vec::with_capacity(locals.len());
    let mut offending = Vec::new();
    for (t, k) in locals.iter().enumerate() {
        let cell = mesh.cell(t);
        let mut w = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in i + 1..=n {
                w = w.max(k[i][j]);
                if k[i][j] > COUPLING_TOLERANCE {
                    offending.push((t, cell[i], cell[j]));
                }
            }
        }
        worst_coupling.push(w);
    }
    NonobtuseCertificate {
        pass: offending.is_empty(),
        worst_coupling,
        offending,
    }
}

/// Checks `∫_T A∇ψ_i·∇ψ_j ≤ 0` for every element and every pair `i ≠ j`.
pub fn check_nonobtuse(mesh: &Triangulation, a: &CoefficientField) -> Result<NonobtuseCertificate> {
    let locals = element_matrices(mesh, a, Execution::default())?;
    Ok(nonobtuse_from_locals(mesh, &locals))
}

#[derive(Clone, Debug)]
pub struct AcutenessCertificate {
    /// Largest `γ` with `∫_T A∇ψ_i·∇ψ_j ≤ -γ ‖∇ψ_i‖_{L²(T)} ‖∇ψ_j‖_{L²(T)}`.
    pub gamma: f64,
    /// Same with the energy norms `(∫_T A∇ψ_i·∇ψ_i)^{1/2}`; invariant under `A ↦ sA`.
    pub gamma_energy: f64,
    /// Smallest step margin of the acute paths over all elements and vertex pairs.
    pub tau: f64,
    /// Longest acute path used.
    pub n_max: usize,
    pub nonobtuse: bool,
}

impl fmt::Display for AcutenessCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nonobtuse: {}", self.nonobtuse)?;
        writeln!(f, "gamma: {}", self.gamma)?;
        writeln!(f, "gamma_energy: {}", self.gamma_energy)?;
        writeln!(f, "tau: {}", self.tau)?;
        writeln!(f, "n_max: {}", self.n_max)
    }
}

pub fn check_uniform_acute(mesh: &Triangulation, a: &CoefficientField) -> Result<AcutenessCertificate> {
    let n = mesh.dim();
    let locals = element_matrices(mesh, a, Execution::default())?;
    let nonobtuse = nonobtuse_from_locals(mesh, &locals).pass;
    let k = gather_matrix(mesh, &locals, Execution::default());
    let mut gamma = f64::INFINITY;
    let mut gamma_energy = f64::INFINITY;
    let mut tau = f64::INFINITY;
    let mut n_max = 0;
    for (t, kt) in locals.iter().enumerate() {
        let g = &mesh.geometry(t).grads;
        let vol = mesh.volume(t);
        for i in 0..=n {
            for j in i + 1..=n {
                let l2 = vol * norm(&g[i]) * norm(&g[j]);
                gamma = gamma.min(-kt[i][j] / l2);
                gamma_energy = gamma_energy.min(-kt[i][j] / (kt[i][i] * kt[j][j]).sqrt());
            }
        }
        if nonobtuse {
            let cell = mesh.cell(t).to_vec();
            for i in 0..=n {
                for j in i + 1..=n {
                    let path = acute_path_in(&k, &cell, cell[i], cell[j])?;
                    tau = tau.min(path.tau);
                    n_max = n_max.max(path.nodes.len() - 1);
                }
            }
        }
    }
    if !nonobtuse {
        gamma = 0.0;
        gamma_energy = 0.0;
        tau = 0.0;
    }
    Ok(AcutenessCertificate {
        gamma: gamma.max(0.0),
        gamma_energy: gamma_energy.max(0.0),
        tau,
        n_max,
        nonobtuse,
    })
}

/// Node sequence `y_0 = x_i, ..., y_N = x_j` inside one element with
/// `-K(y_s, y_{s+1}) ≥ margin_s · max(K(y_s, y_s), K(y_{s+1}, y_{s+1}))`.
#[derive(Clone, Debug, PartialEq)]
pub struct AcutePath {
    pub nodes: Vec<usize>,
    pub margins: Vec<f64>,
    /// Minimum margin; infinite for the empty path.
    pub tau: f64,
}

fn step_margin(k: &CsrMatrix, a: usize, b: usize) -> f64 {
    -k.get(a, b) / k.get(a, a).max(k.get(b, b))
}

fn acute_path_in(k: &CsrMatrix, cell: &[usize], from: usize, to: usize) -> Result<AcutePath> {
    if from == to {
        return Ok(AcutePath {
            nodes: vec![from],
            margins: Vec::new(),
            tau: f64::INFINITY,
        });
    }
    let others: Vec<usize> = cell.iter().copied().filter(|&v| v != from && v != to).collect();
    let max_steps = cell.len() - 1;
    let mut best: Option<AcutePath> = None;
    let mut stack: Vec<Vec<usize>> = vec![vec![from]];
    while let Some(prefix) = stack.pop() {
        let mut path = prefix.clone();
        path.push(to);
        let margins: Vec<f64> = path.windows(2).map(|w| step_margin(k, w[0], w[1])).collect();
        let tau = margins.iter().cloned().fold(f64::INFINITY, f64::min);
        let better = match &best {
            None => true,
            Some(b) => {
                let slack = 1e-12 * b.tau.abs().max(tau.abs());
                tau > b.tau + slack || (tau >= b.tau - slack && path.len() < b.nodes.len())
            }
        };
        if better {
            best = Some(AcutePath {
                nodes: path,
                margins,
                tau,
            });
        }
        if prefix.len() < max_steps {
            for &v in &others {
                if !prefix.contains(&v) {
                    let mut next = prefix.clone();
                    next.push(v);
                    stack.push(next);
                }
            }
        }
    }
    let best = best.expect("direct path always examined");
    if best.tau > 0.0 {
        Ok(best)
    } else {
        Err(Error::Geometry(format!(
            "no acute path between nodes {from} and {to}; the mesh is not A-nonobtuse"
        )))
    }
}

/// Acute path between two vertices of element `t`, maximising the smallest step
/// margin with respect to the global stiffness matrix `k`; shorter paths win ties.
pub fn acute_path(mesh: &Triangulation, k: &CsrMatrix, t: usize, from: usize, to: usize) -> Result<AcutePath> {
    if t >= mesh.num_cells() {
        return Err(Error::invalid(Some(t), "element id out of range"));
    }
    let cell = mesh.cell(t);
    if !cell.contains(&from) || !cell.contains(&to) {
        return Err(Error::InvalidOperand(format!(
            "nodes {from}, {to} are not both vertices of element {t}"
        )));
    }
    acute_path_in(k, cell, from, to)
}

#[derive(Clone, Debug)]
pub struct SubsolutionReport {
    /// `r_i = ∫A∇u·∇ψ_i - ∫fψ_i - ∫F·∇ψ_i`, zero at boundary nodes.
    pub residuals: Vec<f64>,
    pub max_violation: f64,
    pub worst_node: Option<usize>,
    /// `‖K‖_∞‖u‖_∞ + ‖b‖_∞`.
    pub scale: f64,
    pub is_subsolution: bool,
}

impl SubsolutionReport {
    pub fn relative_violation(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_violation / self.scale
        } else {
            self.max_violation
        }
    }
}

impl fmt::Display for SubsolutionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "subsolution: {}", self.is_subsolution)?;
        writeln!(f, "max_violation: {:e}", self.max_violation)?;
        writeln!(f, "scale: {:e}", self.scale)?;
        match self.worst_node {
            Some(i) => writeln!(f, "worst_node: {i}"),
            None => writeln!(f, "worst_node: none"),
        }
    }
}

/// Residual test against every interior basis function, which suffices because
/// nonnegative functions in `V_{h,0}` are nonnegative combinations of them.
pub fn verify_subsolution_system(system: &StiffnessSystem, u: &FeFunction) -> Result<SubsolutionReport> {
    if u.len() != system.rhs.len() {
        return Err(Error::IncompatibleOperands("function and system sizes differ".into()));
    }
    if u.values().iter().zip(&system.boundary).any(|(&v, &b)| b && v != 0.0) {
        return Err(Error::InvalidOperand("function does not vanish on the boundary".into()));
    }
    let ku = system.matrix.matvec(u.values());
    let residuals: Vec<f64> = (0..ku.len())
        .map(|i| if system.boundary[i] { 0.0 } else { ku[i] - system.rhs[i] })
        .collect();
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_node = None;
    for (i, &r) in residuals.iter().enumerate() {
        if !system.boundary[i] && r > max_violation {
            max_violation = r;
            worst_node = Some(i);
        }
    }
    if worst_node.is_none() {
        max_violation = 0.0;
    }
    let scale = system.matrix.inf_norm() * u.max_abs()
        + system.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let is_subsolution = max_violation <= RESIDUAL_TOLERANCE * scale;
    Ok(SubsolutionReport {
        residuals,
        max_violation,
        worst_node,
        scale,
        is_subsolution,
    })
}

pub fn verify_subsolution(
    mesh: &Triangulation,
    u: &FeFunction,
    a: &CoefficientField,
    load: &LoadData,
) -> Result<SubsolutionReport> {
    u.check_mesh(mesh)?;
    if !u.in_vh0(mesh) {
        return Err(Error::InvalidOperand("function does not vanish on the boundary".into()));
    }
    let system = assemble(mesh, a, load)?;
    verify_subsolution_system(&system, u)
}

/// Load `(f_1 ∨ f_2, G_1 + G_2)`; a missing dominating field falls back to the flux itself.
pub fn nodal_max_load(l1: &LoadData, l2: &LoadData) -> Result<LoadData> {
    let (f1, f2) = (l1.f.clone(), l2.f.clone());
    let g1 = l1.dominating.clone().unwrap_or_else(|| l1.flux.clone());
    let g2 = l2.dominating.clone().unwrap_or_else(|| l2.flux.clone());
    let g = move |x: &Point| {
        let (a, b) = (g1(x), g2(x));
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    };
    let g2c = g.clone();
    Ok(LoadData::new(move |x| f1(x).max(f2(x)), g, l1.delta().min(l2.delta()))?.with_dominating(g2c))
}

#[derive(Clone, Debug)]
pub struct NodalMaxReport {
    pub first: SubsolutionReport,
    pub second: SubsolutionReport,
    pub maximum: SubsolutionReport,
}

impl NodalMaxReport {
    pub fn pass(&self) -> bool {
        self.maximum.is_subsolution
    }
}

/// Checks that `u ∨ v` is a subsolution for `(f_1 ∨ f_2, G_1 + G_2)`.
pub fn verify_nodal_max_theorem(
    mesh: &Triangulation,
    u: &FeFunction,
    v: &FeFunction,
    l1: &LoadData,
    l2: &LoadData,
    a: &CoefficientField,
) -> Result<NodalMaxReport> {
    let w = nodal_max(u, v)?;
    Ok(NodalMaxReport {
        first: verify_subsolution(mesh, u, a, l1)?,
        second: verify_subsolution(mesh, v, a, l2)?,
        maximum: verify_subsolution(mesh, &w, a, &nodal_max_load(l1, l2)?)?,
    })
}

#[derive(Clone, Debug)]
pub struct StarReport {
    /// `max(|∫F·∇φ| - ∫G·∇φ)` over the tested `φ`, each normalised to `max φ = 1`.
    pub max_violation: f64,
    pub worst_node: Option<usize>,
    pub basis_tested: usize,
    pub random_tested: usize,
    pub pass: bool,
}

impl fmt::Display for StarReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "assumption_star: {}", self.pass)?;
        writeln!(f, "max_violation: {:e}", self.max_violation)?;
        writeln!(f, "basis_tested: {}", self.basis_tested)?;
        writeln!(f, "random_tested: {}", self.random_tested)?;
        writeln!(f, "kind: necessary condition on sampled test functions")
    }
}

/// Sampled check of `∫G·∇φ ≥ |∫F·∇φ|` for all interior basis functions and
/// `random` nonnegative combinations of them.
pub fn verify_assumption_star(
    mesh: &Triangulation,
    flux: impl Fn(&Point) -> Point + Send + Sync + 'static,
    dominating: impl Fn(&Point) -> Point + Send + Sync + 'static,
    random: usize,
    seed: u64,
) -> Result<StarReport> {
    let fb = assemble_rhs(mesh, &LoadData::new(|_| 0.0, flux, 0.5)?, Execution::default())?;
    let gb = assemble_rhs(mesh, &LoadData::new(|_| 0.0, dominating, 0.5)?, Execution::default())?;
    let interior: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| !mesh.is_boundary(i)).collect();
    let scale = fb.iter().chain(&gb).fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst_node = None;
    for &i in &interior {
        let v = fb[i].abs() - gb[i];
        if v > max_violation {
            max_violation = v;
            worst_node = Some(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !interior.is_empty() {
        for _ in 0..random {
            let mut sf = 0.0;
            let mut sg = 0.0;
            let mut cmax = 0.0_f64;
            for &i in &interior {
                let c: f64 = rng.gen();
                sf += c * fb[i];
                sg += c * gb[i];
                cmax = cmax.max(c);
            }
            if cmax > 0.0 {
                max_violation = max_violation.max((sf.abs() - sg) / cmax);
            }
        }
    }
    if interior.is_empty() {
        max_violation = 0.0;
    }
    Ok(StarReport {
        pass: max_violation <= RESIDUAL_TOLERANCE * scale.max(1.0),
        max_violation,
        worst_node,
        basis_tested: interior.len(),
        random_tested: if interior.is_empty() { 0 } else { random },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_matrix;
    use crate::mesh::BoxDomain;

    fn single(pts: [[f64; 2]; 3]) -> Triangulation {
        let coords = pts.iter().map(|p| [p[0], p[1], 0.0]).collect();
        Triangulation::new(2, coords, vec![vec![0, 1, 2]]).unwrap()
    }

    #[test]
    fn kuhn_square_is_nonobtuse() {
        let m = Triangulation::kuhn(2, 1, BoxDomain::unit()).unwrap();
        let c = check_nonobtuse(&m, &CoefficientField::identity()).unwrap();
        assert!(c.pass);
        for w in c.worst_coupling {
            assert!(w.abs() < 1e-15);
        }
    }

    #[test]
    fn flat_triangle_is_obtuse() {
        let m = single([[0.0, 0.0], [3.0, 0.0], [2.9, 0.2]]);
        let c = check_nonobtuse(&m, &CoefficientField::identity()).unwrap();
        assert!(!c.pass);
        assert_eq!(c.offending, vec![(0, 0, 1)]);
        let c5 = check_nonobtuse(&m, &CoefficientField::scalar(5.0).unwrap()).unwrap();
        assert_eq!(c5.offending, c.offending);
    }

    #[test]
    fn equilateral_gamma_and_path() {
        let m = single([[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]]);
        let c = check_uniform_acute(&m, &CoefficientField::identity()).unwrap();
        assert!((c.gamma - 0.5).abs() < 1e-14);
        assert!((c.tau - 0.5).abs() < 1e-14);
        assert_eq!(c.n_max, 1);
        let k = assemble_matrix(&m, &CoefficientField::identity(), Execution::default()).unwrap();
        let p = acute_path(&m, &k, 0, 0, 0).unwrap();
        assert_eq!(p.nodes, vec![0]);
        assert!(p.margins.is_empty());
    }

    #[test]
    fn right_triangle_routes_through_corner() {
        let m = single([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        let c = check_uniform_acute(&m, &CoefficientField::identity()).unwrap();
        assert_eq!(c.gamma, 0.0);
        let k = assemble_matrix(&m, &CoefficientField::identity(), Execution::default()).unwrap();
        let p = acute_path(&m, &k, 0, 1, 2).unwrap();
        assert_eq!(p.nodes, vec![1, 0, 2]);
        assert!((p.tau - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_is_subsolution_for_nonnegative_source() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        let r = verify_subsolution(&m, &FeFunction::zeros(&m), &CoefficientField::identity(), &LoadData::source(|_| 1.0))
            .unwrap();
        assert!(r.is_subsolution);
        let ones = FeFunction::new(&m, vec![1.0; m.num_nodes()]).unwrap();
        assert!(matches!(
            verify_subsolution(&m, &ones, &CoefficientField::identity(), &LoadData::zero()),
            Err(Error::InvalidOperand(_))
        ));
    }

    #[test]
    fn constant_flux_satisfies_star_trivially() {
        let m = Triangulation::kuhn(2, 4, BoxDomain::unit()).unwrap();
        let r = verify_assumption_star(&m, |_| [1.0, 2.0, 0.0], |_| [0.0; 3], 20, 1).unwrap();
        assert!(r.pass, "{r}");
    }
}
