use std::f64::consts::PI;

use dgfem::degiorgi::oscillation_decay_study;
use dgfem::fem::l2_error;
use dgfem::problems::{
    adaptive_family, checkerboard, checkerboard_mode, checkerboard_trace, dorfler_mark, energy_indicators,
    kellogg_exponent, kellogg_ratio, local_mesh_size, poisson, sign_changing_flux, uniform_family,
};
use dgfem::Error;
use proptest::prelude::*;

fn closed_form_exponent(s: f64) -> f64 {
    (2.0 * s.sqrt() / (1.0 + s)).asin() * 2.0 / PI
}

#[test]
fn kellogg_reference_values() {
    assert!((kellogg_exponent(1.0).unwrap() - 1.0).abs() < 1e-12);
    let s = kellogg_ratio(0.5).unwrap();
    assert!((s - (3.0 + 2.0 * 2f64.sqrt())).abs() < 1e-9);
    assert!((kellogg_exponent(5.0).unwrap() - 0.535_4).abs() < 5e-5);
    assert!(kellogg_exponent(-1.0).is_err());
    assert!(kellogg_ratio(1.0).is_err());
}

#[test]
fn checkerboard_solution_converges_to_exact() {
    let p = checkerboard(5.0).unwrap();
    let exact = p.exact_solution.clone().unwrap().0;
    let mut last = f64::INFINITY;
    for l in 3..=6 {
        let m = p.mesh(1 << l).unwrap();
        let u = p.solve(&m).unwrap();
        let e = l2_error(&m, &u, |x| exact(x)).unwrap();
        assert!(e < 0.6 * last, "level {l}: {e} vs {last}");
        last = e;
    }
}

#[test]
fn half_exponent_checkerboard_oscillation_rate() {
    let gamma = 0.5;
    let p = checkerboard(kellogg_ratio(gamma).unwrap()).unwrap();
    let m = p.mesh(128).unwrap();
    let u = p.solve(&m).unwrap();
    let rep = oscillation_decay_study(&m, &u, &[0.0; 3], 0.5).unwrap();
    let alpha = rep.alpha.unwrap();
    assert!((alpha - gamma).abs() <= 0.2 * gamma, "{alpha}");
}

#[test]
fn sign_changing_problem_is_mirror_symmetric() {
    let p = sign_changing_flux(false);
    let q = sign_changing_flux(true);
    let m = p.mesh(16).unwrap();
    let u = p.solve(&m).unwrap();
    let v = q.solve(&m).unwrap();
    assert!(u.max_abs() > 0.0);
    for i in 0..m.num_nodes() {
        let x = *m.point(i);
        let mirrored = v.eval(&m, &[-x[0], x[1], 0.0]).unwrap();
        assert!((u.values()[i] - mirrored).abs() < 1e-8 * u.max_abs());
    }
}

#[test]
fn poisson_problems() {
    for dim in [2, 3] {
        let p = poisson(dim).unwrap();
        let m = p.mesh(4).unwrap();
        let u = p.solve(&m).unwrap();
        assert!(u.min() >= 0.0 && u.max() > 0.0);
    }
    assert!(matches!(poisson(4), Err(Error::UnsupportedDimension(4))));
}

#[test]
fn families_reach_the_requested_local_size() {
    let p = checkerboard(5.0).unwrap();
    let uniform = uniform_family(&p, &[2, 3]).unwrap();
    assert_eq!(uniform[0].num_cells(), 2 * 16);
    assert_eq!(uniform[1].num_cells(), 2 * 64);

    let adaptive = adaptive_family(&p, &[3, 5], 0.3).unwrap();
    for (mesh, l) in adaptive.iter().zip([3u32, 5]) {
        let target = local_mesh_size(&p.mesh(1 << l).unwrap(), &[0.0; 3]);
        assert!(local_mesh_size(mesh, &[0.0; 3]) <= target * (1.0 + 1e-9));
        assert!(mesh.validate().is_conforming());
    }
    assert!(adaptive[1].num_cells() < uniform_family(&p, &[5]).unwrap()[0].num_cells());
    assert!(adaptive_family(&p, &[3], 0.0).is_err());
}

#[test]
fn energy_indicators_sum_to_energy() {
    let p = poisson(2).unwrap();
    let m = p.mesh(8).unwrap();
    let u = p.solve(&m).unwrap();
    let eta = energy_indicators(&m, &p.coefficient, &u).unwrap();
    let sys = dgfem::fem::assembly::assemble(&m, &p.coefficient, &p.load).unwrap();
    let ku = sys.matrix.matvec(u.values());
    let energy: f64 = ku.iter().zip(u.values()).map(|(a, b)| a * b).sum();
    assert!((eta.iter().sum::<f64>() - energy).abs() < 1e-12 * energy);
}

fn fd_gradient(f: &dyn Fn(&[f64; 3]) -> f64, x: &[f64; 3], h: f64) -> [f64; 2] {
    let d = |k: usize| {
        let (mut a, mut b) = (*x, *x);
        a[k] += h;
        b[k] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    };
    [d(0), d(1)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kellogg_exponent_matches_closed_form(log_s in -5.0f64..5.0) {
        let s = log_s.exp();
        let g = kellogg_exponent(s).unwrap();
        prop_assert!((g - closed_form_exponent(s)).abs() < 1e-9);
        prop_assert!((g - kellogg_exponent(1.0 / s).unwrap()).abs() < 1e-12);
        prop_assert!((checkerboard_trace(s, g) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn kellogg_ratio_inverts_exponent(gamma in 0.05f64..0.95) {
        let s = kellogg_ratio(gamma).unwrap();
        prop_assert!(s > 1.0);
        prop_assert!((kellogg_exponent(s).unwrap() - gamma).abs() < 1e-9);
    }

    #[test]
    fn checkerboard_mode_is_a_weak_solution(
        log_s in -3.0f64..3.0,
        r in 0.1f64..1.0,
        theta in 0.0f64..(2.0 * PI),
    ) {
        let s = log_s.exp();
        let g = kellogg_exponent(s).unwrap();
        let mode = checkerboard_mode(s, g);
        let w = |x: &[f64; 3]| mode(x).0;
        let coef = |x: &[f64; 3]| if x[0] * x[1] > 0.0 { s } else { 1.0 };

        let x = [r * theta.cos(), r * theta.sin(), 0.0];
        if x[0].abs() > 0.02 && x[1].abs() > 0.02 {
            let h = 1e-4;
            let fd = fd_gradient(&w, &x, h);
            let (_, grad) = mode(&x);
            let scale = grad[0].hypot(grad[1]).max(1.0);
            prop_assert!((fd[0] - grad[0]).abs() < 1e-5 * scale && (fd[1] - grad[1]).abs() < 1e-5 * scale);
            let lap = {
                let e = |dx: f64, dy: f64| w(&[x[0] + dx, x[1] + dy, 0.0]);
                let h = 1e-3;
                (e(h, 0.0) + e(-h, 0.0) + e(0.0, h) + e(0.0, -h) - 4.0 * e(0.0, 0.0)) / (h * h)
            };
            prop_assert!(lap.abs() < 1e-3 * scale / r);
        }

        let eps = 1e-9;
        for axis in 0..2 {
            let t = if axis == 0 { r * theta.cos() } else { r * theta.sin() };
            let on = |side: f64| if axis == 0 { [t, side * eps, 0.0] } else { [side * eps, t, 0.0] };
            let (a, b) = (on(1.0), on(-1.0));
            let (wa, ga) = mode(&a);
            let (wb, gb) = mode(&b);
            prop_assert!((wa - wb).abs() < 1e-6);
            let n = 1 - axis;
            let fa = coef(&a) * ga[n];
            let fb = coef(&b) * gb[n];
            prop_assert!((fa - fb).abs() < 1e-5 * fa.abs().max(1.0), "axis {} flux {} vs {}", axis, fa, fb);
        }
    }

    #[test]
    fn dorfler_marking_is_minimal(
        eta in prop::collection::vec(0.0f64..10.0, 1..60),
        fraction in 0.01f64..1.0,
    ) {
        let marked = dorfler_mark(&eta, fraction);
        let total: f64 = eta.iter().sum();
        let acc: f64 = marked.iter().map(|&t| eta[t]).sum();
        prop_assert!(acc >= fraction * total * (1.0 - 1e-12));
        if let Some((&last, rest)) = marked.split_last() {
            let without: f64 = rest.iter().map(|&t| eta[t]).sum();
            prop_assert!(without < fraction * total);
            prop_assert!(eta.iter().enumerate().filter(|(i, _)| !marked.contains(i)).all(|(_, &v)| v <= eta[last]));
        }
    }
}
