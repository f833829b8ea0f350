use std::fmt::Write;
use std::sync::Arc;

use dgfem::conditions::{check_nonobtuse, check_uniform_acute, verify_subsolution, RESIDUAL_TOLERANCE};
use dgfem::degiorgi::{holder_seminorm, oscillation_decay_study, solve_quasilinear, HolderMode, OscillationReport, PicardOptions};
use dgfem::fem::{interpolate, l2_error, nodal_positive_part};
use dgfem::geometry::{dist, dot, Point};
use dgfem::inequalities::{caccioppoli_ratio, poincare_vh_ratio, run_lemma_suite, uniformity_holds, InequalityRecord, Lemma};
use dgfem::io::function_to_string;
use dgfem::problems::{adaptive_family, poisson, uniform_family, BenchmarkProblem};
use dgfem::{CoefficientField, FeFunction, LoadData, Result, Triangulation};

use crate::plot::{LogLogPlot, Series};

pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

pub struct Report {
    pub records: Vec<InequalityRecord>,
    pub summary: String,
    pub checks: Vec<Check>,
    pub plot: Option<LogLogPlot>,
    /// Extra output files `(name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn check_lines(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "  [{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

pub struct Refinement {
    pub levels: u32,
    pub adaptive: bool,
    pub fraction: f64,
    /// Optional hard limit on level-to-level seminorm growth over levels ≥ 4.
    pub max_growth: Option<f64>,
}

impl Refinement {
    fn family(&self, problem: &BenchmarkProblem, levels: &[u32]) -> Result<Vec<Triangulation>> {
        if self.adaptive {
            adaptive_family(problem, levels, self.fraction)
        } else {
            uniform_family(problem, levels)
        }
    }

    fn kind(&self) -> String {
        if self.adaptive {
            format!("adaptive (energy marking, fraction {})", self.fraction)
        } else {
            "uniform".into()
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn center_and_radius(problem: &BenchmarkProblem) -> (Point, f64) {
    let d = problem.domain;
    let mut c = [0.0; 3];
    for k in 0..problem.dim {
        c[k] = 0.5 * (d.lo[k] + d.hi[k]);
    }
    let c = problem.singular_point.unwrap_or(c);
    let r0 = (0..problem.dim)
        .map(|k| (c[k] - d.lo[k]).min(d.hi[k] - c[k]))
        .fold(f64::INFINITY, f64::min);
    (c, r0)
}

fn growth(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn percent(values: &[f64]) -> String {
    let v: Vec<String> = values.iter().map(|g| format!("{:+.2}%", 100.0 * g)).collect();
    format!("[{}]", v.join(", "))
}

/// Seminorms at the fitted exponent, recorded as level-to-level ratios.
fn seminorm_records(
    meshes: &[Triangulation],
    solutions: &[FeFunction],
    levels: &[u32],
    alpha: f64,
    records: &mut Vec<InequalityRecord>,
) -> Result<Vec<f64>> {
    let mut semis = Vec::new();
    for (k, (m, u)) in meshes.iter().zip(solutions).enumerate() {
        let s = holder_seminorm(m, u, alpha, HolderMode::Global)?;
        let prev = if k == 0 { s } else { semis[k - 1] };
        let mut rec = InequalityRecord::new("holder_seminorm", s, prev).param("alpha", alpha);
        rec.level = levels[k] as usize;
        records.push(rec);
        semis.push(s);
    }
    Ok(semis)
}

fn oscillation_records(level: u32, rep: &OscillationReport, records: &mut Vec<InequalityRecord>) {
    for j in 0..rep.osc.len().saturating_sub(1) {
        let mut rec = InequalityRecord::new("oscillation_decay", rep.osc[j + 1], rep.osc[j])
            .param("radius", rep.radii[j + 1]);
        rec.level = level as usize;
        records.push(rec);
    }
}

fn osc_series(levels: &[u32], reports: &[OscillationReport], reference: Option<f64>) -> Vec<Series> {
    let mut series: Vec<Series> = levels
        .iter()
        .zip(reports)
        .map(|(l, r)| Series {
            label: format!("level {l}"),
            points: r.radii.iter().cloned().zip(r.osc.iter().cloned()).collect(),
            dashed: false,
        })
        .collect();
    if let (Some(g), Some(last)) = (reference, reports.last()) {
        if let (Some(&r0), Some(&o0)) = (last.radii.first(), last.osc.first()) {
            let pts = last.radii.iter().map(|&r| (r, o0 * (r / r0).powf(g))).collect();
            series.push(Series { label: format!("slope {g:.3}"), points: pts, dashed: true });
        }
    }
    series
}

/// Seminorm checks: boundedness always, per-level growth over levels ≥ 4 when a limit is set.
fn seminorm_checks(levels: &[u32], semis: &[f64], max_growth: Option<f64>) -> Vec<Check> {
    let tail: Vec<f64> = levels.iter().zip(semis).filter(|(l, _)| **l >= 4).map(|(_, s)| *s).collect();
    let g = growth(&tail);
    let mut checks = vec![Check::new(
        "seminorm boundedness",
        uniformity_holds(semis, 2.0),
        format!("max ≤ 2 × max of first three levels; growth over levels ≥ 4 {}", percent(&g)),
    )];
    if let Some(limit) = max_growth {
        let pass = g.iter().all(|&x| x <= limit);
        checks.push(Check::new(
            "seminorm growth",
            pass,
            format!("levels ≥ 4: {} (limit +{:.1}%)", percent(&g), 100.0 * limit),
        ));
    }
    checks
}

pub fn degiorgi_study(problem: &BenchmarkProblem, refine: &Refinement) -> Result<Report> {
    if refine.levels < 2 {
        return Err(dgfem::Error::InvalidOperand("levels must be at least 2".into()));
    }
    let levels: Vec<u32> = (2..=refine.levels).collect();
    let family = refine.family(problem, &levels)?;
    let (center, r0) = center_and_radius(problem);
    let rho = 0.5 * r0;
    let mut records = Vec::new();
    let mut solutions = Vec::new();
    let mut osc = Vec::new();
    let (mut cacc, mut cacc_flagged) = (Vec::new(), 0);
    let mut poincare = Vec::new();
    for (&level, mesh) in levels.iter().zip(&family) {
        let u = problem.solve(mesh)?;
        let rep = oscillation_decay_study(mesh, &u, &center, r0)?;
        oscillation_records(level, &rep, &mut records);

        let c = median(u.values());
        let eta = interpolate(mesh, |x| (1.0 - dist(x, &center).powi(2) / (rho * rho)).max(0.0).powi(2))?;
        let mut rec = caccioppoli_ratio(mesh, &u, c, &eta, &problem.load)?;
        rec.level = level as usize;
        if rec.is_violation() {
            cacc_flagged += 1;
        }
        cacc.push(rec.ratio);
        records.push(rec);

        let v = nodal_positive_part(&u, c);
        let region: Vec<usize> = (0..mesh.num_cells()).collect();
        let mut rec = poincare_vh_ratio(mesh, &v, &region, 0.25)?;
        rec.level = level as usize;
        if !rec.skipped() {
            poincare.push(rec.ratio);
        }
        records.push(rec);

        solutions.push(u);
        osc.push(rep);
    }

    let alpha = osc.last().and_then(|r| r.alpha);
    let mut checks = vec![
        Check::new(
            "caccioppoli finite",
            cacc_flagged == 0,
            format!("{cacc_flagged} levels with vanishing right-hand side"),
        ),
        Check::new("caccioppoli uniformity", uniformity_holds(&cacc, 2.0), "max ≤ 2 × max of first three levels"),
        Check::new(
            "poincare uniformity",
            uniformity_holds(&poincare, 2.0),
            format!("{} of {} levels meet the zero-set hypothesis", poincare.len(), levels.len()),
        ),
    ];
    let mut semis = Vec::new();
    match alpha {
        Some(a) => {
            checks.push(Check::new("exponent fit", true, format!("alpha {a:.4} on level {}", refine.levels)));
            semis = seminorm_records(&family, &solutions, &levels, a, &mut records)?;
            checks.extend(seminorm_checks(&levels, &semis, refine.max_growth));
            if let (Some(g), true) = (problem.reference_exponent, refine.levels >= 5) {
                let rel = (a - g).abs() / g;
                checks.push(Check::new(
                    "reference exponent",
                    rel <= 0.2,
                    format!("alpha {a:.4} vs {g:.4} ({:.1}% off, limit 20%)", 100.0 * rel),
                ));
            }
        }
        None => checks.push(Check::new("exponent fit", false, "no radii inside the fit window on the finest level")),
    }

    let mut s = String::new();
    let _ = writeln!(s, "degiorgi-study: {}", problem.name);
    let _ = writeln!(s, "refinement: {}, levels {}..={}", refine.kind(), levels[0], refine.levels);
    let _ = writeln!(s, "center ({:.3}, {:.3}), radius {r0}", center[0], center[1]);
    if let Some(g) = problem.reference_exponent {
        let _ = writeln!(s, "reference exponent {g:.6}");
    }
    match alpha {
        Some(a) => {
            let _ = writeln!(s, "fitted alpha {a:.4} (finest level)");
        }
        None => {
            let _ = writeln!(s, "fitted alpha: none");
        }
    }
    let _ = writeln!(
        s,
        "\n{:>5} {:>8} {:>8} {:>10} {:>8} {:>12} {:>10} {:>10}",
        "level", "nodes", "cells", "h_min", "alpha", "seminorm", "cacc", "poincare"
    );
    for (k, (&level, mesh)) in levels.iter().zip(&family).enumerate() {
        let a = osc[k].alpha.map_or("-".to_string(), |a| format!("{a:.4}"));
        let sn = semis.get(k).map_or("-".to_string(), |v| format!("{v:.5}"));
        let pr = records
            .iter()
            .find(|r| r.name == "poincare_vh" && r.level == level as usize)
            .map_or("-".to_string(), |r| if r.skipped() { "skipped".into() } else { format!("{:.4}", r.ratio) });
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>8} {:>10.3e} {:>8} {:>12} {:>10.4} {:>10}",
            level,
            mesh.num_nodes(),
            mesh.num_cells(),
            mesh.h_min(),
            a,
            sn,
            cacc[k],
            pr
        );
    }
    let plot = LogLogPlot {
        title: format!("oscillation decay, {}", problem.name),
        x_label: "radius".into(),
        y_label: "osc".into(),
        series: osc_series(&levels, &osc, alpha),
    };
    let mut report = Report { records, summary: s, checks, plot: Some(plot), files: Vec::new() };
    report.summary.push_str("\nchecks:\n");
    report.summary += &report.check_lines();
    Ok(report)
}

pub fn quasilinear_study(refine: &Refinement) -> Result<Report> {
    if refine.levels < 4 {
        return Err(dgfem::Error::InvalidOperand("levels must be at least 4".into()));
    }
    let problem = poisson(2)?;
    let levels: Vec<u32> = (3..=refine.levels).collect();
    let family = refine.family(&problem, &levels)?;
    let load = LoadData::source(|_| 1.0);
    let center = [0.25, 0.25, 0.0];
    let mut records = Vec::new();
    let mut solutions = Vec::new();
    let mut steps = Vec::new();
    let mut worst_audit = 0.0_f64;
    let mut audits_pass = true;
    let mut osc = Vec::new();
    for (&level, mesh) in levels.iter().zip(&family) {
        let a = Arc::new(|_: &Point, _: f64, g: &Point| 1.0 + 1.0 / (1.0 + dot(g, g)));
        let q = solve_quasilinear(mesh, a, 1.0, 2.0, &load, PicardOptions::default())?;
        let mut rec = InequalityRecord::new("picard_steps", q.iterations as f64, 200.0);
        rec.level = level as usize;
        records.push(rec);
        steps.push(q.iterations);
        let top = q.u.max();
        for frac in [0.0, 0.25, 0.5, 0.75] {
            let w = nodal_positive_part(&q.u, frac * top);
            let rep = verify_subsolution(mesh, &w, &q.frozen, &load.truncation_data())?;
            worst_audit = worst_audit.max(rep.relative_violation());
            audits_pass &= rep.is_subsolution;
            let mut rec = InequalityRecord::new("truncation_subsolution", rep.max_violation, RESIDUAL_TOLERANCE * rep.scale)
                .param("level_fraction", frac);
            rec.level = level as usize;
            records.push(rec);
        }
        let rep = oscillation_decay_study(mesh, &q.u, &center, 0.5)?;
        oscillation_records(level, &rep, &mut records);
        osc.push(rep);
        solutions.push(q.u);
    }
    let alpha = osc.last().and_then(|r| r.alpha);
    let mut checks = vec![
        Check::new(
            "picard convergence",
            steps.iter().all(|&s| s <= 200),
            format!("steps per level {steps:?}"),
        ),
        Check::new(
            "truncation audits",
            audits_pass,
            format!("worst relative residual {worst_audit:.3e}"),
        ),
    ];
    let mut semis = Vec::new();
    match alpha {
        Some(a) => {
            checks.push(Check::new("exponent fit", a > 0.0, format!("alpha {a:.4}")));
            semis = seminorm_records(&family, &solutions, &levels, a, &mut records)?;
            checks.extend(seminorm_checks(&levels, &semis, refine.max_growth));
        }
        None => checks.push(Check::new("exponent fit", false, "no radii inside the fit window")),
    }
    let mut s = String::new();
    let _ = writeln!(s, "quasilinear-study: -div(a(grad u) grad u) = 1, a = 1 + 1/(1 + |grad u|^2)");
    let _ = writeln!(s, "refinement: {}, levels {}..={}", refine.kind(), levels[0], refine.levels);
    let _ = writeln!(s, "\n{:>5} {:>8} {:>7} {:>10} {:>12}", "level", "nodes", "steps", "max u", "seminorm");
    for (k, &level) in levels.iter().enumerate() {
        let sn = semis.get(k).map_or("-".to_string(), |v| format!("{v:.5}"));
        let _ = writeln!(
            s,
            "{:>5} {:>8} {:>7} {:>10.6} {:>12}",
            level,
            family[k].num_nodes(),
            steps[k],
            solutions[k].max(),
            sn
        );
    }
    let plot = LogLogPlot {
        title: "oscillation decay, quasilinear".into(),
        x_label: "radius".into(),
        y_label: "osc".into(),
        series: osc_series(&levels, &osc, None),
    };
    let mut report = Report { records, summary: s, checks, plot: Some(plot), files: Vec::new() };
    report.summary.push_str("\nchecks:\n");
    report.summary += &report.check_lines();
    Ok(report)
}

pub fn verify_inequalities(seed: u64, trials: usize) -> Result<Report> {
    let results = run_lemma_suite(seed, trials)?;
    let mut s = String::new();
    let _ = writeln!(s, "verify-inequalities: seed {seed}, {trials} trials per lemma\n");
    let mut checks = Vec::new();
    for lemma in Lemma::ALL {
        let of: Vec<_> = results.iter().filter(|t| t.lemma == lemma).collect();
        let bad = of.iter().filter(|t| !t.holds).count();
        let worst = of.iter().map(|t| t.record.ratio).fold(0.0, f64::max);
        let first = of.iter().find(|t| !t.holds).map(|t| t.record.level);
        let detail = match first {
            Some(k) => format!("{bad} of {} violated, first at trial {k}", of.len()),
            None => format!("{} instances, max ratio {worst:.4}", of.len()),
        };
        checks.push(Check::new(lemma.name(), bad == 0, detail));
    }
    let records = results.into_iter().map(|t| t.record).collect();
    let mut report = Report { records, summary: s, checks, plot: None, files: Vec::new() };
    report.summary += &report.check_lines();
    Ok(report)
}

pub fn solve(problem: &BenchmarkProblem, mesh: Triangulation) -> Result<Report> {
    if mesh.dim() != problem.dim {
        return Err(dgfem::Error::InvalidOperand(format!(
            "mesh is {}-dimensional but {} is posed in {} dimensions",
            mesh.dim(),
            problem.name,
            problem.dim
        )));
    }
    let u = problem.solve(&mesh)?;
    let mut s = String::new();
    let _ = writeln!(s, "solve: {}", problem.name);
    let _ = writeln!(
        s,
        "mesh: dim {}, {} nodes, {} cells, h in [{:.3e}, {:.3e}], gamma {:.4}",
        mesh.dim(),
        mesh.num_nodes(),
        mesh.num_cells(),
        mesh.h_min(),
        mesh.h_max(),
        mesh.gamma()
    );
    let _ = writeln!(s, "solution: min {:.6e}, max {:.6e}", u.min(), u.max());
    let mut checks = Vec::new();
    if let Some(exact) = &problem.exact_solution {
        let err = l2_error(&mesh, &u, |x| (exact.0)(x))?;
        let _ = writeln!(s, "L2 error against the exact solution {err:.6e}");
    }
    let cert = check_nonobtuse(&mesh, &problem.coefficient)?;
    let _ = writeln!(s, "nonobtuse: {}", cert.pass);
    checks.push(Check::new("solve", true, format!("{} unknowns", mesh.num_nodes())));
    let files = vec![
        ("solve.mesh".to_string(), dgfem::io::mesh_to_string(&mesh)),
        ("solve.values".to_string(), function_to_string(u.values())),
    ];
    Ok(Report { records: Vec::new(), summary: s, checks, plot: None, files })
}

pub fn audit_mesh(mesh: &Triangulation, a: &CoefficientField) -> Result<Report> {
    let mut s = String::new();
    let conformity = mesh.validate();
    let _ = writeln!(
        s,
        "mesh: dim {}, {} nodes, {} cells, h in [{:.3e}, {:.3e}]",
        mesh.dim(),
        mesh.num_nodes(),
        mesh.num_cells(),
        mesh.h_min(),
        mesh.h_max()
    );
    let _ = writeln!(s, "conforming: {}", conformity.is_conforming());
    let _ = writeln!(s, "shape regularity gamma: {:.6}", mesh.gamma());
    let _ = writeln!(s, "coefficient: {}", a.label());
    let cert = check_nonobtuse(mesh, a)?;
    let _ = writeln!(s, "{cert}");
    if cert.pass {
        let acute = check_uniform_acute(mesh, a)?;
        let _ = writeln!(s, "{acute}");
    }
    let checks = vec![Check::new(
        "conforming",
        conformity.is_conforming(),
        format!("{} violations", conformity.violations.len()),
    )];
    Ok(Report { records: Vec::new(), summary: s, checks, plot: None, files: Vec::new() })
}
