//! Exact oscillation of P1 functions over balls and dyadic decay studies.

use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::geometry::{add, dist, dot, scale, solve_small, sub, project_affine, Point};
use crate::mesh::Triangulation;

/// Component of `g` tangent to the affine hull of `pts`.
fn tangent_part(g: &Point, pts: &[Point]) -> Point {
    let k = pts.len() - 1;
    let e: Vec<Point> = (1..=k).map(|i| sub(&pts[i], &pts[0])).collect();
    let gram: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| dot(&e[i], &e[j])).collect()).collect();
    let rhs: Vec<f64> = (0..k).map(|i| dot(&e[i], g)).collect();
    let Some(mu) = solve_small(gram, rhs) else { return [0.0; 3] };
    let mut out = [0.0; 3];
    for i in 0..k {
        out = add(&out, &scale(&e[i], mu[i]));
    }
    out
}

fn in_face(x: &Point, face: &[Point]) -> bool {
    match project_affine(x, face) {
        Some((_, bary)) => bary.iter().all(|&b| b >= -1e-12),
        None => false,
    }
}

/// `(min, max)` of `u` over `T ∩ B(x_0, R)`, or `None` if they do not meet.
///
/// An affine function attains its extremes over the convex set `T ∩ B` at a vertex
/// of `T` inside the ball or at a point of the sphere in the relative interior of
/// some face `S`; on `S ∩ ∂B` those are `c ± ρ ĝ_S` with `c` the projection of `x_0`
/// on `aff S` and `ĝ_S` the unit tangential gradient.
pub fn element_range_in_ball(
    mesh: &Triangulation,
    u: &FeFunction,
    t: usize,
    x0: &Point,
    r: f64,
) -> Option<(f64, f64)> {
    let n = mesh.dim();
    let p = mesh.cell_points(t);
    let vals = u.cell_values(mesh, t);
    let grad = u.gradient(mesh, t);
    let eval = |x: &Point| vals[0] + dot(&grad, &sub(x, &p[0]));
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut push = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    for k in 0..=n {
        if dist(&p[k], x0) <= r {
            push(vals[k]);
        }
    }
    let mut face = Vec::with_capacity(n + 1);
    for mask in 1u32..(1 << (n + 1)) {
        face.clear();
        face.extend((0..=n).filter(|k| mask & (1 << k) != 0).map(|k| p[k]));
        if face.len() < 2 {
            continue;
        }
        let Some((c, _)) = project_affine(x0, &face) else { continue };
        let d2 = r * r - dot(&sub(x0, &c), &sub(x0, &c));
        if d2 < 0.0 {
            continue;
        }
        if in_face(&c, &face) {
            push(eval(&c));
        }
        let rho = d2.sqrt();
        let gt = tangent_part(&grad, &face);
        let gn = dot(&gt, &gt).sqrt();
        if gn == 0.0 || rho == 0.0 {
            continue;
        }
        for sgn in [-1.0, 1.0] {
            let x = add(&c, &scale(&gt, sgn * rho / gn));
            if in_face(&x, &face) {
                push(eval(&x));
            }
        }
    }
    if lo.is_finite() {
        Some((lo, hi))
    } else {
        None
    }
}

/// `osc_{B(x_0,R) ∩ Ω} u`, exact for P1 functions.
pub fn oscillation(mesh: &Triangulation, u: &FeFunction, x0: &Point, r: f64) -> Result<f64> {
    u.check_mesh(mesh)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for t in mesh.cells_meeting_ball(x0, r) {
        if let Some((a, b)) = element_range_in_ball(mesh, u, t, x0, r) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
    }
    if lo.is_finite() {
        Ok(hi - lo)
    } else {
        Err(Error::EmptyRegion)
    }
}

/// `osc` over a union of closed elements (nodal extremes).
pub fn oscillation_on_cells(mesh: &Triangulation, u: &FeFunction, cells: &[usize]) -> Result<f64> {
    u.check_mesh(mesh)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &t in cells {
        for &i in mesh.cell(t) {
            lo = lo.min(u.values()[i]);
            hi = hi.max(u.values()[i]);
        }
    }
    if lo.is_finite() {
        Ok(hi - lo)
    } else {
        Err(Error::EmptyRegion)
    }
}

#[derive(Clone, Debug)]
pub struct OscillationReport {
    pub center: Point,
    /// Radii `R_0 2^{-j}`, decreasing.
    pub radii: Vec<f64>,
    pub osc: Vec<f64>,
    /// `osc(R/2) / osc(R)` for consecutive radii.
    pub contractions: Vec<f64>,
    /// Fit window `[2 h_T, R_0 / 2]`.
    pub window: (f64, f64),
    /// Least-squares slope of `log osc` against `log R` in the window, clipped to `(0, 1]`.
    pub alpha: Option<f64>,
    /// Unclipped slope.
    pub raw_slope: Option<f64>,
    /// `exp` of the fitted intercept.
    pub constant: Option<f64>,
    /// `1 - median contraction` in the window.
    pub theta: Option<f64>,
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let m = x.len();
    if m < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / m as f64;
    let my = y.iter().sum::<f64>() / m as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    Some(if m % 2 == 1 { v[m / 2] } else { 0.5 * (v[m / 2 - 1] + v[m / 2]) })
}

/// Oscillation on dyadic balls `B(x_0, R_0 2^{-j})` down to the local mesh size.
pub fn oscillation_decay_study(mesh: &Triangulation, u: &FeFunction, x0: &Point, r0: f64) -> Result<OscillationReport> {
    u.check_mesh(mesh)?;
    let h = mesh
        .cells_meeting_ball(x0, 0.0)
        .iter()
        .map(|&t| mesh.diameter(t))
        .fold(0.0, f64::max);
    if h == 0.0 {
        return Err(Error::Geometry(format!("center {x0:?} lies outside the mesh")));
    }
    let window = (2.0 * h, 0.5 * r0);
    let mut radii = Vec::new();
    let mut r = r0;
    while r >= 0.5 * h {
        radii.push(r);
        r *= 0.5;
    }
    let osc = radii
        .iter()
        .map(|&r| oscillation(mesh, u, x0, r))
        .collect::<Result<Vec<f64>>>()?;
    let contractions: Vec<f64> = osc
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let in_window = |r: f64| r >= window.0 * (1.0 - 1e-12) && r <= window.1 * (1.0 + 1e-12);
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (r, o) in radii.iter().zip(&osc) {
        if in_window(*r) && *o > 0.0 {
            lx.push(r.ln());
            ly.push(o.ln());
        }
    }
    let fit = fit_line(&lx, &ly);
    let mut cs: Vec<f64> = contractions
        .iter()
        .enumerate()
        .filter(|(j, _)| in_window(radii[*j]) && in_window(radii[*j + 1]) && osc[*j] > 0.0)
        .map(|(_, &c)| c)
        .collect();
    let theta = median(&mut cs).map(|m| 1.0 - m);
    Ok(OscillationReport {
        center: *x0,
        radii,
        osc,
        contractions,
        window,
        alpha: fit.map(|(_, b)| b.clamp(f64::MIN_POSITIVE, 1.0)),
        raw_slope: fit.map(|(_, b)| b),
        constant: fit.map(|(a, _)| a.exp()),
        theta,
    })
}
