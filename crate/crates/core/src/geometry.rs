//! Small fixed-size vector geometry for simplices in two and three dimensions.
//!
//! Points are stored as `[f64; 3]`; in two dimensions the third component is zero.

pub type Point = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn mat_vec(m: &Mat3, v: &Point) -> Point {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

pub fn midpoint(a: &Point, b: &Point) -> Point {
    [
        0.5 * (a[0] + b[0]),
        0.5 * (a[1] + b[1]),
        0.5 * (a[2] + b[2]),
    ]
}

pub fn centroid(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        c = add(&c, p);
    }
    scale(&c, 1.0 / pts.len() as f64)
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Signed volume of the simplex spanned by `pts` (n + 1 points).
pub fn signed_volume(pts: &[Point], n: usize) -> f64 {
    let e1 = sub(&pts[1], &pts[0]);
    let e2 = sub(&pts[2], &pts[0]);
    match n {
        2 => 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]),
        3 => {
            let e3 = sub(&pts[3], &pts[0]);
            dot(&cross(&e1, &e2), &e3) / 6.0
        }
        _ => unreachable!("dimension checked at construction"),
    }
}

/// (n-1)-dimensional measure of the facet spanned by `pts` (n points).
pub fn facet_measure(pts: &[Point], n: usize) -> f64 {
    match n {
        2 => dist(&pts[0], &pts[1]),
        3 => 0.5 * norm(&cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]))),
        _ => unreachable!("dimension checked at construction"),
    }
}

pub fn diameter(pts: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            h = h.max(dist(&pts[i], &pts[j]));
        }
    }
    h
}

/// Inradius `n |T| / sum of facet measures`.
pub fn inradius(pts: &[Point], n: usize) -> f64 {
    let vol = signed_volume(pts, n).abs();
    let mut area = 0.0;
    let mut facet = Vec::with_capacity(n);
    for skip in 0..=n {
        facet.clear();
        facet.extend((0..=n).filter(|&k| k != skip).map(|k| pts[k]));
        area += facet_measure(&facet, n);
    }
    n as f64 * vol / area
}

/// Gradients of the barycentric coordinates of a nondegenerate simplex.
pub fn barycentric_gradients(pts: &[Point], n: usize) -> [Point; 4] {
    let mut g = [[0.0; 3]; 4];
    let e1 = sub(&pts[1], &pts[0]);
    let e2 = sub(&pts[2], &pts[0]);
    match n {
        2 => {
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            g[1] = [e2[1] / det, -e2[0] / det, 0.0];
            g[2] = [-e1[1] / det, e1[0] / det, 0.0];
        }
        3 => {
            let e3 = sub(&pts[3], &pts[0]);
            let det = dot(&cross(&e1, &e2), &e3);
            g[1] = scale(&cross(&e2, &e3), 1.0 / det);
            g[2] = scale(&cross(&e3, &e1), 1.0 / det);
            g[3] = scale(&cross(&e1, &e2), 1.0 / det);
        }
        _ => unreachable!("dimension checked at construction"),
    }
    for k in 0..3 {
        g[0][k] = -(1..=n).map(|i| g[i][k]).sum::<f64>();
    }
    g
}

/// Solve a small dense system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..m {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Closest point to `x` on the affine hull of `pts` together with the affine
/// coordinates of that point, or `None` for a degenerate point set.
pub fn project_affine(x: &Point, pts: &[Point]) -> Option<(Point, Vec<f64>)> {
    let k = pts.len() - 1;
    if k == 0 {
        return Some((pts[0], vec![1.0]));
    }
    let e: Vec<Point> = (1..=k).map(|i| sub(&pts[i], &pts[0])).collect();
    let r = sub(x, &pts[0]);
    let gram: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| dot(&e[i], &e[j])).collect())
        .collect();
    let rhs: Vec<f64> = (0..k).map(|i| dot(&e[i], &r)).collect();
    let mu = solve_small(gram, rhs)?;
    let mut p = pts[0];
    for i in 0..k {
        p = add(&p, &scale(&e[i], mu[i]));
    }
    let mut bary = Vec::with_capacity(k + 1);
    bary.push(1.0 - mu.iter().sum::<f64>());
    bary.extend(mu);
    Some((p, bary))
}

/// Euclidean distance from `x` to the closed simplex with vertices `pts`.
///
/// The closest point lies in the relative interior of exactly one face; every
/// face is tried and the smallest admissible projection distance is returned.
pub fn point_simplex_distance(x: &Point, pts: &[Point]) -> f64 {
    let m = pts.len();
    let mut best = f64::INFINITY;
    let mut face = Vec::with_capacity(m);
    for mask in 1u32..(1 << m) {
        face.clear();
        face.extend((0..m).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]));
        if face.len() == 1 {
            best = best.min(dist(x, &face[0]));
            continue;
        }
        if let Some((p, bary)) = project_affine(x, &face) {
            if bary.iter().all(|&b| b >= -1e-14) {
                best = best.min(dist(x, &p));
            }
        }
    }
    best
}

/// Distance between the closed segments `[p0, p1]` and `[q0, q1]`.
pub fn segment_segment_distance(p0: &Point, p1: &Point, q0: &Point, q1: &Point) -> f64 {
    let d1 = sub(p1, p0);
    let d2 = sub(q1, q0);
    let r = sub(p0, q0);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    let (s, t);
    if a <= f64::EPSILON && e <= f64::EPSILON {
        return norm(&r);
    }
    if a <= f64::EPSILON {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= f64::EPSILON {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-15 * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let cp = add(p0, &scale(&d1, s));
    let cq = add(q0, &scale(&d2, t));
    dist(&cp, &cq)
}

/// Distance between two closed simplices that do not intersect.
///
/// For disjoint convex polytopes of dimension at most three the minimum is
/// attained on a vertex–simplex pair or, in three dimensions, an edge–edge pair.
pub fn simplex_simplex_distance(a: &[Point], b: &[Point], n: usize) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        best = best.min(point_simplex_distance(p, b));
    }
    for p in b {
        best = best.min(point_simplex_distance(p, a));
    }
    if n == 3 {
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                for k in 0..b.len() {
                    for l in k + 1..b.len() {
                        best = best.min(segment_segment_distance(&a[i], &a[j], &b[k], &b[l]));
                    }
                }
            }
        }
    }
    best
}

/// Barycentric coordinates of `x` with respect to a simplex with vertices `pts`.
pub fn barycentric(x: &Point, pts: &[Point], grads: &[Point; 4], n: usize) -> [f64; 4] {
    let mut l = [0.0; 4];
    let r = sub(x, &pts[0]);
    let mut s = 0.0;
    for i in 1..=n {
        l[i] = dot(&grads[i], &r);
        s += l[i];
    }
    l[0] = 1.0 - s;
    l
}
