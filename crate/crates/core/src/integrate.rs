//! Exact integration of polynomials in barycentric coordinates over simplices.
//!
//! Affine functions on a simplex are given by their vertex values (`[f64; 4]`,
//! only the first `n + 1` entries are used).

use crate::geometry::factorial;

/// `∫_T λ^α = |T| n! α! / (n + |α|)!` for the multi-index given by `counts`.
pub fn monomial_integral(volume: f64, n: usize, counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let alpha: f64 = counts.iter().map(|&c| factorial(c)).product();
    volume * factorial(n) * alpha / factorial(n + total)
}

/// Exact integral of a product of affine functions.
pub fn product_integral(volume: f64, n: usize, factors: &[[f64; 4]]) -> f64 {
    let m = factors.len();
    if m == 0 {
        return volume;
    }
    let base = n + 1;
    let tuples = base.pow(m as u32);
    let mut sum = 0.0;
    for code in 0..tuples {
        let mut c = code;
        let mut counts = [0usize; 4];
        let mut coef = 1.0;
        for f in factors {
            let i = c % base;
            c /= base;
            counts[i] += 1;
            coef *= f[i];
            if coef == 0.0 {
                break;
            }
        }
        if coef == 0.0 {
            continue;
        }
        let alpha: f64 = counts[..base].iter().map(|&k| factorial(k)).product();
        sum += coef * alpha;
    }
    volume * factorial(n) / factorial(n + m) * sum
}

/// Complete homogeneous symmetric polynomial `h_m` of the given values.
pub fn complete_homogeneous(values: &[f64], m: usize) -> f64 {
    let mut h = vec![0.0; m + 1];
    h[0] = 1.0;
    for &x in values {
        for j in 1..=m {
            h[j] += x * h[j - 1];
        }
    }
    h[m]
}

/// `∫_T v^m` for affine `v`.
pub fn power_integral(volume: f64, n: usize, v: &[f64; 4], m: usize) -> f64 {
    volume * factorial(n) * factorial(m) / factorial(n + m) * complete_homogeneous(&v[..=n], m)
}

/// `∫_T v^2` for affine `v`.
pub fn square_integral(volume: f64, n: usize, v: &[f64; 4]) -> f64 {
    let s: f64 = v[..=n].iter().sum();
    let q: f64 = v[..=n].iter().map(|x| x * x).sum();
    volume / ((n + 1) * (n + 2)) as f64 * (q + s * s)
}

/// Exact `∫_T |∏ a_j|` by splitting the simplex along the zero sets of the factors.
pub fn abs_product_integral(volume: f64, n: usize, factors: &[[f64; 4]]) -> f64 {
    let mut stack: Vec<(f64, Vec<[f64; 4]>)> = vec![(volume, factors.to_vec())];
    let mut total = 0.0;
    while let Some((vol, vals)) = stack.pop() {
        match find_sign_change(&vals, n) {
            None => total += product_integral(vol, n, &vals).abs(),
            Some((j, p, q)) => {
                let t = vals[j][p] / (vals[j][p] - vals[j][q]);
                let z: Vec<f64> = vals
                    .iter()
                    .enumerate()
                    .map(|(l, f)| if l == j { 0.0 } else { (1.0 - t) * f[p] + t * f[q] })
                    .collect();
                let mut left = vals.clone();
                let mut right = vals;
                for (l, zl) in z.iter().enumerate() {
                    left[l][p] = *zl;
                    right[l][q] = *zl;
                }
                let (vl, vr) = (vol * (1.0 - t), vol * t);
                if vl > 0.0 {
                    stack.push((vl, left));
                }
                if vr > 0.0 {
                    stack.push((vr, right));
                }
            }
        }
    }
    total
}

fn find_sign_change(vals: &[[f64; 4]], n: usize) -> Option<(usize, usize, usize)> {
    for (j, f) in vals.iter().enumerate() {
        for p in 0..=n {
            for q in 0..=n {
                if f[p] > 0.0 && f[q] < 0.0 {
                    return Some((j, p, q));
                }
            }
        }
    }
    None
}

/// `∫_T |v|` for affine `v`.
pub fn abs_integral(volume: f64, n: usize, v: &[f64; 4]) -> f64 {
    abs_product_integral(volume, n, std::slice::from_ref(v))
}

/// Measure of `{v > 0}` inside the simplex.
pub fn positive_measure(volume: f64, n: usize, v: &[f64; 4]) -> f64 {
    let pos = v[..=n].iter().filter(|&&x| x > 0.0).count();
    if pos == 0 {
        return 0.0;
    }
    if pos == n + 1 {
        return volume;
    }
    let mut stack = vec![(volume, *v)];
    let mut meas = 0.0;
    while let Some((vol, w)) = stack.pop() {
        match find_sign_change(std::slice::from_ref(&w), n) {
            None => {
                if w[..=n].iter().any(|&x| x > 0.0) {
                    meas += vol;
                }
            }
            Some((_, p, q)) => {
                let t = w[p] / (w[p] - w[q]);
                let mut left = w;
                let mut right = w;
                left[p] = 0.0;
                right[q] = 0.0;
                stack.push((vol * (1.0 - t), left));
                stack.push((vol * t, right));
            }
        }
    }
    meas
}

/// Order-two symmetric quadrature rule: barycentric points and weights summing to one.
pub fn order2_rule(n: usize) -> (Vec<[f64; 4]>, f64) {
    match n {
        2 => {
            let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
            (
                vec![[a, b, b, 0.0], [b, a, b, 0.0], [b, b, a, 0.0]],
                1.0 / 3.0,
            )
        }
        _ => {
            let (a, b) = (0.585_410_196_624_968_5, 0.138_196_601_125_010_5);
            (
                vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
                0.25,
            )
        }
    }
}

/// Weighted barycentric points, weights summing to one: degree 5 on triangles
/// (7 points), degree 3 on tetrahedra (5 points).
pub fn high_order_rule(n: usize) -> Vec<([f64; 4], f64)> {
    match n {
        2 => {
            let mut out = vec![([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0], 0.225)];
            for (a, b, w) in [
                (0.059_715_871_789_770, 0.470_142_064_105_115, 0.132_394_152_788_506),
                (0.797_426_985_353_087, 0.101_286_507_323_456, 0.125_939_180_544_827),
            ] {
                out.push(([a, b, b, 0.0], w));
                out.push(([b, a, b, 0.0], w));
                out.push(([b, b, a, 0.0], w));
            }
            out
        }
        _ => {
            let mut out = vec![([0.25; 4], -0.8)];
            let (a, b) = (0.5, 1.0 / 6.0);
            for k in 0..4 {
                let mut l = [b; 4];
                l[k] = a;
                out.push((l, 0.45));
            }
            out
        }
    }
}
