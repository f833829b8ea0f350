//! Benchmark problems: coefficient fields, loads and reference exponents.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble, solve_dirichlet};
use crate::fem::load::ScalarFn;
use crate::fem::{CoefficientField, FeFunction, LoadData};
use crate::geometry::{dot, mat_vec, Mat3, Point};
use crate::mesh::{BoxDomain, Triangulation};
use crate::refine::bisect;

#[derive(Clone, Debug)]
pub struct BenchmarkProblem {
    pub name: String,
    pub dim: usize,
    pub domain: BoxDomain,
    pub coefficient: CoefficientField,
    pub load: LoadData,
    /// Known Hölder exponent at `singular_point`, when available.
    pub reference_exponent: Option<f64>,
    pub singular_point: Option<Point>,
    pub exact_solution: Option<ExactSolution>,
}

#[derive(Clone)]
pub struct ExactSolution(pub ScalarFn);

impl std::fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("ExactSolution")
    }
}

impl BenchmarkProblem {
    /// Kuhn mesh with `cells_per_side` subdivisions of the domain.
    pub fn mesh(&self, cells_per_side: usize) -> Result<Triangulation> {
        Triangulation::kuhn(self.dim, cells_per_side, self.domain)
    }

    pub fn solve(&self, mesh: &Triangulation) -> Result<FeFunction> {
        let sys = assemble(mesh, &self.coefficient, &self.load)?;
        Ok(solve_dirichlet(mesh, &sys)?.u)
    }
}

/// Trace of the transfer matrix of a singular mode `r^γ Φ(θ)` across two
/// quadrants with coefficients `s` and `1`; a half-turn periodic mode needs `-2`.
pub fn checkerboard_trace(s: f64, gamma: f64) -> f64 {
    let c = (gamma * PI / 2.0).cos();
    let q = (gamma * PI / 2.0).sin().powi(2);
    2.0 * c * c - (s + 1.0 / s) * q
}

fn bisect_root(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest positive Hölder exponent of the checkerboard problem at the cross point,
/// the first root of `trace + 2 = 0` in `(0, 1]`.
pub fn kellogg_exponent(s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidOperand(format!("coefficient ratio must be positive, got {s}")));
    }
    let g = |gamma: f64| checkerboard_trace(s, gamma) + 2.0;
    if g(1.0).abs() <= 1e-14 {
        return Ok(1.0);
    }
    // g(0) = 4 and g decreases on (0, 1]
    Ok(bisect_root(0.0, 1.0, g))
}

/// Ratio `s > 1` whose checkerboard exponent is `gamma ∈ (0, 1)`.
pub fn kellogg_ratio(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidOperand(format!("target exponent must lie in (0, 1), got {gamma}")));
    }
    let g = |log_s: f64| checkerboard_trace(log_s.exp(), gamma) + 2.0;
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        if hi > 700.0 {
            return Err(Error::InvalidOperand(format!("no ratio reaches exponent {gamma}")));
        }
    }
    Ok(bisect_root(0.0, hi, g).exp())
}

/// Singular mode `w = r^γ Φ(θ)` of the checkerboard operator with ratio `s`:
/// continuous, with continuous conormal derivative across the axes, and odd under
/// `x ↦ -x`. Returns `(w, ∇w)`.
pub fn checkerboard_mode(s: f64, gamma: f64) -> impl Fn(&Point) -> (f64, Point) + Send + Sync + Clone {
    let (c, sn) = ((gamma * PI / 2.0).cos(), (gamma * PI / 2.0).sin());
    let transfer = |k: f64| [[c, sn / k], [-k * sn, c]];
    let mul = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        [
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ]
    };
    let m0 = transfer(s);
    let half = mul(transfer(1.0), m0);
    let r0 = [half[0][1], -(half[0][0] + 1.0)];
    let r1 = [half[1][1] + 1.0, -half[1][0]];
    let n0 = r0[0].hypot(r0[1]);
    let n1 = r1[0].hypot(r1[1]);
    let v = if n0.max(n1) < 1e-12 {
        [1.0, 0.0]
    } else if n0 >= n1 {
        [r0[0] / n0, r0[1] / n0]
    } else {
        [r1[0] / n1, r1[1] / n1]
    };
    // state (w, a ∂_θ w / γ) at the start of quadrants 0 and 1
    let v1 = [m0[0][0] * v[0] + m0[0][1] * v[1], m0[1][0] * v[0] + m0[1][1] * v[1]];
    let starts = [(v, s), (v1, 1.0), ([-v[0], -v[1]], s), ([-v1[0], -v1[1]], 1.0)];
    move |x: &Point| {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return (0.0, [0.0; 3]);
        }
        let theta = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        let k = ((theta / (PI / 2.0)) as usize).min(3);
        let local = theta - k as f64 * PI / 2.0;
        let (state, a) = starts[k];
        let (ca, sa) = ((gamma * local).cos(), (gamma * local).sin());
        let phi = state[0] * ca + state[1] / a * sa;
        let dphi = gamma * (-state[0] * sa + state[1] / a * ca);
        let rg = r.powf(gamma);
        let w = rg * phi;
        // ∇w = γ r^{γ-1} Φ e_r + r^{γ-1} Φ' e_θ
        let (er, et) = ([x[0] / r, x[1] / r], [-x[1] / r, x[0] / r]);
        let g = [
            rg / r * (gamma * phi * er[0] + dphi * et[0]),
            rg / r * (gamma * phi * er[1] + dphi * et[1]),
            0.0,
        ];
        (w, g)
    }
}

const CUTOFF_INNER: f64 = 0.6;
const CUTOFF_OUTER: f64 = 0.95;

/// Radial cutoff `χ(r)` with `χ = 1` on `r ≤ 0.6`, `χ = 0` on `r ≥ 0.95`; returns `(χ, χ', χ'')`.
fn radial_cutoff(r: f64) -> (f64, f64, f64) {
    let w = CUTOFF_OUTER - CUTOFF_INNER;
    let t = ((r - CUTOFF_INNER) / w).clamp(0.0, 1.0);
    let smooth = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let d1 = 30.0 * t * t * (1.0 - t) * (1.0 - t) / w;
    let d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w);
    (1.0 - smooth, -d1, -d2)
}

/// Checkerboard on `(-1, 1)^2` with `A = s I` where `x y > 0` and `A = I` elsewhere.
///
/// The exact solution is `χ(r) r^γ Φ(θ)`: the leading singular mode cut off in
/// an annulus, so the load is supported in `0.6 < r < 0.95`.
pub fn checkerboard(s: f64) -> Result<BenchmarkProblem> {
    let gamma = kellogg_exponent(s)?;
    let mode = checkerboard_mode(s, gamma);
    let m2 = mode.clone();
    let f = move |x: &Point| {
        let r = x[0].hypot(x[1]);
        let (_, d1, d2) = radial_cutoff(r);
        if d1 == 0.0 && d2 == 0.0 {
            return 0.0;
        }
        let a = if x[0] * x[1] > 0.0 { s } else { 1.0 };
        let (w, _) = m2(x);
        -a * w * (d2 + (2.0 * gamma + 1.0) * d1 / r)
    };
    let mut p = checkerboard_with_source(s, f)?;
    p.exact_solution = Some(ExactSolution(Arc::new(move |x: &Point| {
        radial_cutoff(x[0].hypot(x[1])).0 * mode(x).0
    })));
    Ok(p)
}

pub fn checkerboard_with_source(
    s: f64,
    f: impl Fn(&Point) -> f64 + Send + Sync + 'static,
) -> Result<BenchmarkProblem> {
    let gamma = kellogg_exponent(s)?;
    let a = CoefficientField::scalar_fn(format!("checkerboard({s})"), s.min(1.0), s.max(1.0), move |x| {
        if x[0] * x[1] > 0.0 {
            s
        } else {
            1.0
        }
    })?;
    Ok(BenchmarkProblem {
        name: format!("checkerboard-{s}"),
        dim: 2,
        domain: BoxDomain::cube(-1.0, 1.0),
        coefficient: a,
        load: LoadData::source(f),
        reference_exponent: Some(gamma),
        singular_point: Some([0.0; 3]),
        exact_solution: None,
    })
}

fn step_flux(x1: f64) -> Point {
    if x1.abs() >= 1.0 {
        [-1.0, 0.0, 0.0]
    } else {
        [1.0, 0.0, 0.0]
    }
}

fn step_dominating(x1: f64) -> Point {
    if x1 <= -1.0 {
        [3.0, 0.0, 0.0]
    } else if x1 < 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        [-1.0, 0.0, 0.0]
    }
}

/// `-Δu = 1` on the unit square or cube.
pub fn poisson(dim: usize) -> Result<BenchmarkProblem> {
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    Ok(BenchmarkProblem {
        name: format!("poisson-{dim}d"),
        dim,
        domain: BoxDomain::unit(),
        coefficient: CoefficientField::identity(),
        load: LoadData::source(|_| 1.0),
        reference_exponent: None,
        singular_point: None,
        exact_solution: None,
    })
}

/// Flux `F = ∓e_1` with sign-changing divergence on `(-2, 2)^2` and its dominating
/// field `G`; `reflected` mirrors both in `x_1`.
pub fn sign_changing_flux(reflected: bool) -> BenchmarkProblem {
    let sgn = if reflected { -1.0 } else { 1.0 };
    let flux = move |x: &Point| {
        let v = step_flux(sgn * x[0]);
        [sgn * v[0], 0.0, 0.0]
    };
    let dom = move |x: &Point| {
        let v = step_dominating(sgn * x[0]);
        [sgn * v[0], 0.0, 0.0]
    };
    let load = LoadData::new(|_| 0.0, flux, 0.5)
        .expect("valid delta")
        .with_dominating(dom);
    BenchmarkProblem {
        name: if reflected { "sign-changing-flux-reflected" } else { "sign-changing-flux" }.into(),
        dim: 2,
        domain: BoxDomain::cube(-2.0, 2.0),
        coefficient: CoefficientField::identity(),
        load,
        reference_exponent: None,
        singular_point: None,
        exact_solution: None,
    }
}

pub type GradientFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Point) -> Mat3 + Send + Sync>;

/// Problem with exact solution `u*` for constant `A`: `f = -Σ A_ij ∂_ij u*`.
///
/// The supplied gradient and Hessian are cross-checked against central differences
/// on a lattice of interior points.
pub fn manufactured(
    dim: usize,
    domain: BoxDomain,
    u: ScalarFn,
    grad: GradientFn,
    hess: HessianFn,
    a: Mat3,
) -> Result<BenchmarkProblem> {
    let coefficient = CoefficientField::constant(dim, a)?;
    check_derivatives(dim, &domain, &u, &grad, &hess)?;
    let h2 = hess.clone();
    let f = move |x: &Point| {
        let hx = h2(x);
        let mut s = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                s -= a[i][j] * hx[i][j];
            }
        }
        s
    };
    Ok(BenchmarkProblem {
        name: "manufactured".into(),
        dim,
        domain,
        coefficient,
        load: LoadData::source(f),
        reference_exponent: None,
        singular_point: None,
        exact_solution: Some(ExactSolution(u)),
    })
}

const DERIVATIVE_TOLERANCE: f64 = 1e-4;

fn check_derivatives(dim: usize, domain: &BoxDomain, u: &ScalarFn, grad: &GradientFn, hess: &HessianFn) -> Result<()> {
    let m = 5usize;
    let eps = 1e-5 * (0..dim).map(|k| domain.hi[k] - domain.lo[k]).fold(0.0, f64::max);
    let count = m.pow(dim as u32);
    for idx in 0..count {
        let mut x = [0.0; 3];
        let mut r = idx;
        for k in 0..dim {
            let frac = ((r % m) as f64 + 0.5) / m as f64;
            r /= m;
            x[k] = domain.lo[k] + frac * (domain.hi[k] - domain.lo[k]);
        }
        let g = grad(&x);
        let hx = hess(&x);
        for k in 0..dim {
            let mut xp = x;
            let mut xm = x;
            xp[k] += eps;
            xm[k] -= eps;
            let fd = (u(&xp) - u(&xm)) / (2.0 * eps);
            let gp = grad(&xp);
            let gm = grad(&xm);
            let mismatch = |exact: f64, approx: f64| (exact - approx).abs() > DERIVATIVE_TOLERANCE * (1.0 + exact.abs());
            if mismatch(g[k], fd) {
                return Err(Error::invalid(
                    None,
                    format!("gradient component {k} at {x:?}: supplied {} vs finite difference {fd}", g[k]),
                ));
            }
            for j in 0..dim {
                let fd2 = (gp[j] - gm[j]) / (2.0 * eps);
                if mismatch(hx[j][k], fd2) {
                    return Err(Error::invalid(
                        None,
                        format!("Hessian entry ({j}, {k}) at {x:?}: supplied {} vs finite difference {fd2}", hx[j][k]),
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Meshes with `2^ℓ` cells per side for each level `ℓ`.
pub fn uniform_family(problem: &BenchmarkProblem, levels: &[u32]) -> Result<Vec<Triangulation>> {
    levels.iter().map(|&l| problem.mesh(1 << l)).collect()
}

/// Elementwise energy `∫_T A∇u·∇u`.
pub fn energy_indicators(mesh: &Triangulation, a: &CoefficientField, u: &FeFunction) -> Result<Vec<f64>> {
    u.check_mesh(mesh)?;
    (0..mesh.num_cells())
        .map(|t| {
            let g = u.gradient(mesh, t);
            let ag = mat_vec(&a.element_matrix(mesh, t)?, &g);
            Ok((dot(&ag, &g) * mesh.volume(t)).max(0.0))
        })
        .collect()
}

/// Largest diameter among the elements containing `x`.
pub fn local_mesh_size(mesh: &Triangulation, x: &Point) -> f64 {
    mesh.cells_meeting_ball(x, 0.0)
        .iter()
        .map(|&t| mesh.diameter(t))
        .fold(0.0, f64::max)
}

/// Smallest set of elements carrying at least `fraction` of the total indicator.
pub fn dorfler_mark(indicators: &[f64], fraction: f64) -> Vec<usize> {
    let total: f64 = indicators.iter().sum();
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| indicators[b].total_cmp(&indicators[a]));
    let mut acc = 0.0;
    let mut out = Vec::new();
    for t in order {
        if acc >= fraction * total {
            break;
        }
        acc += indicators[t];
        out.push(t);
    }
    out
}

const MAX_ROUNDS_PER_LEVEL: usize = 200;

/// Energy-driven NVB family starting from the `2^2`-per-side Kuhn mesh.
///
/// Level `ℓ` is the first mesh whose local size at the problem's singular point
/// (the domain center if none is set) does not exceed that of the uniform level-`ℓ`
/// mesh.
pub fn adaptive_family(problem: &BenchmarkProblem, levels: &[u32], fraction: f64) -> Result<Vec<Triangulation>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidOperand(format!("marking fraction must lie in (0, 1], got {fraction}")));
    }
    let center = problem.singular_point.unwrap_or_else(|| {
        let mut c = [0.0; 3];
        for k in 0..problem.dim {
            c[k] = 0.5 * (problem.domain.lo[k] + problem.domain.hi[k]);
        }
        c
    });
    let mut sorted = levels.to_vec();
    sorted.sort_unstable();
    let mut mesh = problem.mesh(4)?;
    let mut out = Vec::new();
    for &l in &sorted {
        let target = local_mesh_size(&problem.mesh(1 << l)?, &center) * (1.0 + 1e-9);
        let mut rounds = 0;
        while local_mesh_size(&mesh, &center) > target {
            if rounds == MAX_ROUNDS_PER_LEVEL {
                return Err(Error::Refinement { elements: mesh.cells_meeting_ball(&center, 0.0) });
            }
            let u = problem.solve(&mesh)?;
            let eta = energy_indicators(&mesh, &problem.coefficient, &u)?;
            mesh = bisect(&mesh, &dorfler_mark(&eta, fraction))?;
            rounds += 1;
        }
        out.push(mesh.clone());
    }
    Ok(out)
}
