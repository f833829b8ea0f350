use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dgfem::conditions::{check_nonobtuse, verify_nodal_max_theorem, verify_subsolution};
use dgfem::degiorgi::{holder_seminorm, oscillation_decay_study, solve_quasilinear, HolderMode, PicardOptions};
use dgfem::fem::assembly::{assemble, local_stiffness, solve_dirichlet};
use dgfem::fem::coefficient::scalar_matrix;
use dgfem::fem::{interpolate, l2_error, nodal_positive_part, CoefficientField, FeFunction, LoadData};
use dgfem::geometry::{dot, Point};
use dgfem::inequalities::{caccioppoli_ratio, poincare_vh_ratio, run_lemma_suite, uniformity_holds, Lemma, LemmaTrial};
use dgfem::problems::{adaptive_family, checkerboard, kellogg_ratio, manufactured, sign_changing_flux, uniform_family, GradientFn, HessianFn};
use dgfem::refine::{bisect, nvb_similarity_classes};
use dgfem::{BoxDomain, Result, Triangulation};

const SEED: u64 = 0x5eed_2024;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn local_stiffness_exactness() -> Result<Outcome> {
    let mesh = Triangulation::new(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![vec![0, 1, 2]])?;
    let k = local_stiffness(&mesh, 0, &scalar_matrix(1.0));
    let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    let mut err = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            err = err.max((k[i][j] - want[i][j]).abs());
        }
    }
    Ok(Outcome::new(err <= 1e-12, format!("max entry error {err:.2e}")))
}

fn convergence_sanity() -> Result<Outcome> {
    let u: dgfem::fem::ScalarFn = Arc::new(|x| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]));
    let grad: GradientFn = Arc::new(|x| {
        [(1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), (1.0 - 2.0 * x[1]) * x[0] * (1.0 - x[0]), 0.0]
    });
    let hess: HessianFn = Arc::new(|x| {
        let xy = (1.0 - 2.0 * x[0]) * (1.0 - 2.0 * x[1]);
        [[-2.0 * x[1] * (1.0 - x[1]), xy, 0.0], [xy, -2.0 * x[0] * (1.0 - x[0]), 0.0], [0.0; 3]]
    });
    let p = manufactured(2, BoxDomain::unit(), u.clone(), grad, hess, scalar_matrix(1.0))?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for l in 2..=6 {
        let mesh = p.mesh(1 << l)?;
        let uh = p.solve(&mesh)?;
        hs.push(mesh.h_max());
        errs.push(l2_error(&mesh, &uh, |x| u(x))?);
    }
    let rates: Vec<f64> = errs.windows(2).zip(hs.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect();
    let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (_, order) = dgfem::degiorgi::oscillation::fit_line(&lx, &ly).expect("five levels");
    let shown: Vec<String> = rates.iter().map(|r| format!("{r:.3}")).collect();
    Ok(Outcome::new(
        order >= 1.9,
        format!("fitted L2 order {order:.3}, pairwise [{}]", shown.join(", ")),
    ))
}

fn graded_corner(dim: usize, n: usize, rounds: usize, corner: Point) -> Result<Triangulation> {
    let mut m = Triangulation::kuhn(dim, n, BoxDomain::unit())?;
    for _ in 0..rounds {
        let marked = m.cells_meeting_ball(&corner, 0.0);
        m = bisect(&m, &marked)?;
    }
    Ok(m)
}

fn discrete_maximum_principle() -> Result<Outcome> {
    let mut meshes: Vec<(String, Triangulation, CoefficientField)> = Vec::new();
    for n in [4, 8, 16, 32] {
        meshes.push((format!("kuhn2d-{n}"), Triangulation::kuhn(2, n, BoxDomain::unit())?, CoefficientField::identity()));
    }
    for n in [2, 4, 6] {
        meshes.push((format!("kuhn3d-{n}"), Triangulation::kuhn(3, n, BoxDomain::unit())?, CoefficientField::identity()));
    }
    meshes.push(("graded2d".into(), graded_corner(2, 4, 12, [0.0; 3])?, CoefficientField::identity()));
    meshes.push(("graded3d".into(), graded_corner(3, 2, 9, [0.0; 3])?, CoefficientField::identity()));
    for rounds in 1..=5 {
        let m = dgfem::refine::bisect_uniform(&Triangulation::kuhn(3, 2, BoxDomain::unit())?, rounds)?;
        meshes.push((format!("kuhn3d-bisected-{rounds}"), m, CoefficientField::identity()));
    }
    let cb = checkerboard(kellogg_ratio(0.5)?)?;
    for m in adaptive_family(&cb, &[3, 5], 0.3)? {
        meshes.push(("checkerboard-adaptive".into(), m, cb.coefficient.clone()));
    }
    let sources: Vec<(&str, LoadData)> = vec![
        ("f=1", LoadData::source(|_| 1.0)),
        ("f=bump", LoadData::source(|x| (-20.0 * dot(x, x)).exp())),
        ("f=|sin|", LoadData::source(|x| (7.0 * x[0] + 3.0 * x[1]).sin().abs())),
    ];
    let mut worst = f64::INFINITY;
    let mut cases = 0;
    let mut skipped = Vec::new();
    for (name, mesh, a) in &meshes {
        if !check_nonobtuse(mesh, a)?.pass {
            skipped.push(name.as_str());
            continue;
        }
        for (_, load) in &sources {
            let u = assemble(mesh, a, load).and_then(|s| solve_dirichlet(mesh, &s))?.u;
            worst = worst.min(u.min());
            cases += 1;
        }
    }
    Ok(Outcome::new(
        worst >= -1e-10 && cases >= 30,
        format!(
            "{cases} solves on {} certified meshes, min nodal value {worst:.3e}; not nonobtuse, excluded: [{}]",
            cases / sources.len(),
            skipped.join(", ")
        ),
    ))
}

fn unconditional_lemmas() -> Result<Outcome> {
    const TRIALS: usize = 1000;
    let trials = run_lemma_suite(SEED, TRIALS)?;
    let mut lines = Vec::new();
    let mut ok = true;
    for lemma in Lemma::ALL {
        let of: Vec<&LemmaTrial> = trials.iter().filter(|t| t.lemma == lemma).collect();
        let bad = of.iter().filter(|t| !t.holds).count();
        ok &= bad == 0 && of.len() >= TRIALS;
        let worst = of.iter().map(|t| t.record.ratio).fold(0.0, f64::max);
        lines.push(format!("{lemma} {bad}/{} (max ratio {worst:.3})", of.len()));
    }
    Ok(Outcome::new(ok, format!("violations: {}", lines.join(", "))))
}

/// `u - z` with `K z = r`, `r > 0` on interior nodes: a strict subsolution.
fn random_subsolution(
    mesh: &Triangulation,
    a: &CoefficientField,
    load: &LoadData,
    rng: &mut ChaCha8Rng,
) -> Result<FeFunction> {
    let u = assemble(mesh, a, load).and_then(|s| solve_dirichlet(mesh, &s))?.u;
    let mut sys = assemble(mesh, a, &LoadData::zero())?;
    let amp = rng.gen_range(0.001..0.5);
    sys.rhs = (0..mesh.num_nodes())
        .map(|i| if mesh.is_boundary(i) { 0.0 } else { amp * rng.gen_range(0.1..1.0) * mesh.node_h(i).powi(2) })
        .collect();
    let z = solve_dirichlet(mesh, &sys)?.u;
    u.sub(&z)
}

fn nodal_max_subsolution() -> Result<Outcome> {
    let base = sign_changing_flux(false);
    let refl = sign_changing_flux(true);
    let mesh = base.mesh(16)?;
    let a = CoefficientField::identity();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
    let mut worst = 0.0f64;
    let mut failed = 0;
    for _ in 0..100 {
        let (c1, d1, c2, d2) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.5..0.5),
        );
        let (f1, g1) = (base.load.flux.clone(), base.load.dominating.clone().expect("dominating field"));
        let (f2, g2) = (refl.load.flux.clone(), refl.load.dominating.clone().expect("dominating field"));
        let l1 = LoadData::new(move |x| c1 + d1 * x[1], move |x| f1(x), 0.5)?.with_dominating(move |x| g1(x));
        let l2 = LoadData::new(move |x| c2 + d2 * x[0], move |x| f2(x), 0.5)?.with_dominating(move |x| g2(x));
        let u = random_subsolution(&mesh, &a, &l1, &mut rng)?;
        let v = random_subsolution(&mesh, &a, &l2, &mut rng)?;
        let both = verify_nodal_max_theorem(&mesh, &u, &v, &l1, &l2, &a)?;
        let positive = verify_nodal_max_theorem(&mesh, &u, &FeFunction::zeros(&mesh), &l1, &LoadData::zero(), &a)?;
        for rep in [&both, &positive] {
            worst = worst.max(rep.maximum.relative_violation());
            if !(rep.first.is_subsolution && rep.second.is_subsolution && rep.pass()) {
                failed += 1;
            }
        }
    }
    Ok(Outcome::new(
        failed == 0,
        format!("100 trials (max and positive part), failures {failed}, max relative residual {worst:.3e}"),
    ))
}

fn central_bump(x: &Point) -> f64 {
    (1.0 - 4.0 * dot(x, x)).max(0.0).powi(2)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn caccioppoli_uniformity() -> Result<Outcome> {
    let p = checkerboard(5.0)?;
    let family = adaptive_family(&p, &[2, 3, 4, 5, 6, 7], 0.3)?;
    let mut ratios = Vec::new();
    for mesh in &family {
        let u = p.solve(mesh)?;
        let eta = interpolate(mesh, central_bump)?;
        let rec = caccioppoli_ratio(mesh, &u, median(u.values()), &eta, &p.load)?;
        if rec.is_violation() {
            return Ok(Outcome::new(false, "Caccioppoli right-hand side vanished"));
        }
        ratios.push(rec.ratio);
    }
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    let floor = ratios.iter().take(3).fold(0.0, |a: f64, &b| a.max(b));
    Ok(Outcome::new(
        uniformity_holds(&ratios, 2.0),
        format!("ratios [{}], envelope {:.4}", shown.join(", "), 2.0 * floor),
    ))
}

fn poincare_uniformity() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut ok = true;
    let cb = checkerboard(5.0)?;
    let families: Vec<(&str, Vec<Triangulation>, Box<dyn Fn(&Point) -> f64>)> = vec![
        (
            "checkerboard-adaptive",
            adaptive_family(&cb, &[2, 3, 4, 5, 6, 7], 0.3)?,
            Box::new(|x: &Point| x[0].max(0.0) * (1.0 - x[1] * x[1])),
        ),
        (
            "corner-graded-2d",
            (0..6).map(|l| graded_corner(2, 4, 3 * l, [0.0; 3])).collect::<Result<_>>()?,
            Box::new(|x: &Point| (0.5 - x[0]).max(0.0) * (1.0 + x[1]) + (0.5 - x[0]).max(0.0).sqrt() * 0.1),
        ),
        (
            "corner-graded-3d",
            (0..6).map(|l| graded_corner(3, 2, 3 * l, [0.0; 3])).collect::<Result<_>>()?,
            Box::new(|x: &Point| (0.5 - x[2]).max(0.0) * (1.0 + x[0]) + (0.5 - x[2]).max(0.0).sqrt() * 0.1),
        ),
    ];
    for (name, family, g) in &families {
        let mut ratios = Vec::new();
        for mesh in family {
            let v = interpolate(mesh, |x| g(x))?;
            let region: Vec<usize> = (0..mesh.num_cells()).collect();
            let rec = poincare_vh_ratio(mesh, &v, &region, 0.25)?;
            if rec.skipped() || rec.is_violation() {
                ok = false;
            }
            ratios.push(rec.ratio);
        }
        ok &= uniformity_holds(&ratios, 2.0);
        let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
        lines.push(format!("{name} [{}]", shown.join(", ")));
    }
    Ok(Outcome::new(ok, lines.join("; ")))
}

fn holder_family(label: &str, family: &[Triangulation], levels: &[u32], problem: &dgfem::problems::BenchmarkProblem) -> Result<(bool, String)> {
    let x0 = problem.singular_point.unwrap_or([0.0; 3]);
    let mut solutions = Vec::new();
    let mut alphas = Vec::new();
    for mesh in family {
        let u = problem.solve(mesh)?;
        let rep = oscillation_decay_study(mesh, &u, &x0, 1.0)?;
        alphas.push(rep.alpha);
        solutions.push(u);
    }
    let mut ok = true;
    let mut alpha_text = Vec::new();
    for (l, a) in levels.iter().zip(&alphas) {
        if *l >= 5 {
            match a {
                Some(a) => {
                    ok &= (*a - 0.5).abs() <= 0.1;
                    alpha_text.push(format!("L{l} {a:.3}"));
                }
                None => {
                    ok = false;
                    alpha_text.push(format!("L{l} none"));
                }
            }
        }
    }
    let Some(alpha) = *alphas.last().expect("levels") else {
        return Ok((false, format!("{label}: no exponent fit on finest level")));
    };
    let semis: Vec<f64> = family
        .iter()
        .zip(&solutions)
        .map(|(m, u)| holder_seminorm(m, u, alpha, HolderMode::Global))
        .collect::<Result<_>>()?;
    let growth: Vec<f64> = semis.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    ok &= growth.iter().all(|&g| g <= 0.05);
    let gtext: Vec<String> = growth.iter().map(|g| format!("{:+.2}%", 100.0 * g)).collect();
    Ok((
        ok,
        format!("{label}: alpha [{}], seminorm growth at {alpha:.3} [{}]", alpha_text.join(", "), gtext.join(", ")),
    ))
}

fn holder_uniformity() -> Result<Outcome> {
    let p = checkerboard(kellogg_ratio(0.5)?)?;
    let levels = [4, 5, 6, 7];
    let (u_ok, u_text) = holder_family("uniform", &uniform_family(&p, &levels)?, &levels, &p)?;
    let (a_ok, a_text) = holder_family("adaptive", &adaptive_family(&p, &levels, 0.3)?, &levels, &p)?;
    Ok(Outcome::new(u_ok && a_ok, format!("{u_text}; {a_text}")))
}

fn nvb_shape_regularity() -> Result<Outcome> {
    let mut ok = true;
    let mut lines = Vec::new();
    for dim in [2, 3] {
        let mut mesh = Triangulation::kuhn(dim, 1, BoxDomain::unit())?;
        let mut brute = 0.0f64;
        for t in 0..mesh.num_cells() {
            let (seed, tag) = mesh.refinement_seed(t);
            brute = brute.max(nvb_similarity_classes(&seed, dim, tag)?.into_iter().fold(0.0, f64::max));
        }
        let mut observed = mesh.gamma();
        for _ in 0..10 {
            let marked = mesh.cells_meeting_ball(&[0.0; 3], 0.0);
            mesh = bisect(&mesh, &marked)?;
            observed = observed.max(mesh.gamma());
        }
        let rel = (observed - brute).abs() / brute;
        ok &= rel <= 1e-10;
        lines.push(format!("{dim}D observed {observed:.12} brute force {brute:.12}"));
    }
    Ok(Outcome::new(ok, lines.join("; ")))
}

fn quasilinear_driver() -> Result<Outcome> {
    let load = LoadData::source(|_| 1.0);
    let levels = [3u32, 4, 5, 6, 7];
    let x0 = [0.25, 0.25, 0.0];
    let mut worst_iter = 0;
    let mut worst_trunc = 0.0f64;
    let mut ok = true;
    let mut meshes = Vec::new();
    let mut sols = Vec::new();
    for &l in &levels {
        let mesh = Triangulation::kuhn(2, 1 << l, BoxDomain::unit())?;
        let a = Arc::new(|_: &Point, _: f64, g: &Point| 1.0 + 1.0 / (1.0 + dot(g, g)));
        let q = solve_quasilinear(&mesh, a, 1.0, 2.0, &load, PicardOptions::default())?;
        worst_iter = worst_iter.max(q.iterations);
        let tail = &q.residuals[5.min(q.residuals.len())..q.residuals.len() - 1];
        ok &= tail.windows(2).all(|w| w[1] <= w[0]);
        let top = q.u.max();
        for frac in [0.0, 0.25, 0.5, 0.75] {
            let w = nodal_positive_part(&q.u, frac * top);
            let rep = verify_subsolution(&mesh, &w, &q.frozen, &load.truncation_data())?;
            worst_trunc = worst_trunc.max(rep.relative_violation());
            ok &= rep.is_subsolution;
        }
        meshes.push(mesh);
        sols.push(q.u);
    }
    let finest = oscillation_decay_study(meshes.last().expect("levels"), sols.last().expect("levels"), &x0, 0.5)?;
    let Some(alpha) = finest.alpha else {
        return Ok(Outcome::new(false, "no exponent fit on finest level"));
    };
    ok &= alpha > 0.0;
    let semis: Vec<f64> = meshes
        .iter()
        .zip(&sols)
        .skip(1)
        .map(|(m, u)| holder_seminorm(m, u, alpha, HolderMode::Global))
        .collect::<Result<_>>()?;
    let growth: Vec<f64> = semis.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    ok &= growth.iter().all(|&g| g <= 0.05);
    ok &= worst_iter <= 200;
    let gtext: Vec<String> = growth.iter().map(|g| format!("{:+.2}%", 100.0 * g)).collect();
    Ok(Outcome::new(
        ok,
        format!(
            "max Picard steps {worst_iter}, worst truncation residual {worst_trunc:.2e}, alpha {alpha:.3}, seminorm growth [{}]",
            gtext.join(", ")
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, fn() -> Result<Outcome>)> = vec![
        ("local stiffness exactness", local_stiffness_exactness),
        ("convergence sanity", convergence_sanity),
        ("discrete maximum principle", discrete_maximum_principle),
        ("unconditional lemmas", unconditional_lemmas),
        ("nodal-max subsolution", nodal_max_subsolution),
        ("Caccioppoli uniformity", caccioppoli_uniformity),
        ("Poincare uniformity", poincare_uniformity),
        ("Holder uniformity", holder_uniformity),
        ("NVB shape regularity", nvb_shape_regularity),
        ("quasilinear driver", quasilinear_driver),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name} ({secs:.1} s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
