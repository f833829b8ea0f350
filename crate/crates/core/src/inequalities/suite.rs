//! Randomized instances of the unconditional lemmas.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{jensen_audit, prod_rearrange_ratio, weak_type_check, InequalityRecord};
use crate::degiorgi::cutoff::{build_cutoff, CutoffKind};
use crate::degiorgi::iteration::{fast_geometric_bound, telescoping_bound};
use crate::error::Result;
use crate::fem::{product_commutator_defect, FeFunction};
use crate::geometry::{signed_volume, Point};
use crate::mesh::{simplex_gamma, BoxDomain, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lemma {
    Jensen,
    WeakType,
    ProjProductShift,
    ProdRearrange,
    FastGeometric,
    Telescoping,
}

impl Lemma {
    pub const ALL: [Lemma; 6] = [
        Lemma::Jensen,
        Lemma::WeakType,
        Lemma::ProjProductShift,
        Lemma::ProdRearrange,
        Lemma::FastGeometric,
        Lemma::Telescoping,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lemma::Jensen => "jensen",
            Lemma::WeakType => "weak_type",
            Lemma::ProjProductShift => "proj_product_shift",
            Lemma::ProdRearrange => "prod_rearrange",
            Lemma::FastGeometric => "fast_geometric",
            Lemma::Telescoping => "telescoping",
        }
    }
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct LemmaTrial {
    pub lemma: Lemma,
    pub record: InequalityRecord,
    pub holds: bool,
}

struct Meshes {
    small2: Triangulation,
    small3: Triangulation,
    medium2: Triangulation,
    medium3: Triangulation,
}

/// `trials` seeded instances of every lemma; each lemma draws from its own stream.
pub fn run_lemma_suite(seed: u64, trials: usize) -> Result<Vec<LemmaTrial>> {
    let meshes = Meshes {
        small2: Triangulation::kuhn(2, 3, BoxDomain::unit())?,
        small3: Triangulation::kuhn(3, 2, BoxDomain::unit())?,
        medium2: Triangulation::kuhn(2, 16, BoxDomain::unit())?,
        medium3: Triangulation::kuhn(3, 5, BoxDomain::unit())?,
    };
    let mut out = Vec::with_capacity(6 * trials);
    for (stream, lemma) in Lemma::ALL.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        for trial in 0..trials {
            let (mut record, holds) = match lemma {
                Lemma::Jensen => jensen_trial(&meshes, trial, &mut rng)?,
                Lemma::WeakType => weak_type_trial(&meshes, trial, &mut rng)?,
                Lemma::ProjProductShift => shift_trial(&meshes, trial, &mut rng)?,
                Lemma::ProdRearrange => rearrange_trial(trial, &mut rng),
                Lemma::FastGeometric => fast_geometric_trial(&mut rng)?,
                Lemma::Telescoping => telescoping_trial(&mut rng)?,
            };
            record.level = trial;
            out.push(LemmaTrial { lemma, record, holds });
        }
    }
    Ok(out)
}

fn random_nonnegative(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) })
        .collect()
}

fn random_signed(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn jensen_trial(m: &Meshes, trial: usize, rng: &mut ChaCha8Rng) -> Result<(InequalityRecord, bool)> {
    let mesh = if trial % 2 == 0 { &m.small2 } else { &m.small3 };
    let eta = FeFunction::new(mesh, random_nonnegative(rng, mesh.num_nodes()))?;
    let q = 2 + (trial % 2) as u32;
    let rec = jensen_audit(mesh, &eta, q, 6)?.param("q", q);
    let holds = rec.ratio <= 1.0;
    Ok((rec, holds))
}

fn weak_type_trial(m: &Meshes, trial: usize, rng: &mut ChaCha8Rng) -> Result<(InequalityRecord, bool)> {
    let mesh = if trial % 4 == 3 { &m.medium3 } else { &m.medium2 };
    let u = FeFunction::new(mesh, random_signed(rng, mesh.num_nodes()))?;
    let mut x0 = [0.0; 3];
    for c in x0.iter_mut().take(mesh.dim()) {
        *c = rng.gen_range(0.2..0.8);
    }
    let r = rng.gen_range(0.08..0.3);
    let k = rng.gen_range(0..5u32);
    let eta_k = build_cutoff(mesh, &x0, r, k, CutoffKind::Boundary)?;
    let eta_next = build_cutoff(mesh, &x0, r, k + 1, CutoffKind::Boundary)?;
    let c0 = rng.gen_range(-0.5..0.5);
    let lambda = rng.gen_range(0.05..2.0);
    let rec = weak_type_check(mesh, &u, c0, k, lambda, &eta_k, &eta_next)?.param("radius", r);
    let holds = !rec.is_violation() && rec.lhs <= rec.rhs * (1.0 + 1e-10);
    Ok((rec, holds))
}

fn shift_trial(m: &Meshes, trial: usize, rng: &mut ChaCha8Rng) -> Result<(InequalityRecord, bool)> {
    let mesh = if trial % 2 == 0 { &m.small2 } else { &m.small3 };
    let nn = mesh.num_nodes();
    let u = FeFunction::new(mesh, random_signed(rng, nn))?;
    let w = FeFunction::new(mesh, random_signed(rng, nn))?;
    let (a, b) = (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
    let d0 = product_commutator_defect(mesh, &u, &w)?;
    let d1 = product_commutator_defect(mesh, &u.map(|x| x + a), &w.map(|x| x - b))?;
    let mut gap = 0.0_f64;
    let mut scale = 1.0_f64;
    for (p, q) in d0.iter().zip(&d1) {
        gap = gap.max((p.max_defect - q.max_defect).abs());
        gap = gap.max((p.max_grad_defect - q.max_grad_defect).abs());
        scale = scale.max(p.max_defect.abs()).max(p.max_grad_defect.abs());
    }
    let rec = InequalityRecord::new("proj_product_shift", gap, 1e-12 * scale)
        .param("shift_u", a)
        .param("shift_w", b);
    let holds = gap <= 1e-12 * scale;
    Ok((rec, holds))
}

fn rearrange_trial(trial: usize, rng: &mut ChaCha8Rng) -> (InequalityRecord, bool) {
    let n = if trial % 2 == 0 { 2 } else { 3 };
    let pts: Vec<Point> = loop {
        let pts: Vec<Point> = (0..=n)
            .map(|_| {
                let mut p = [0.0; 3];
                for c in p.iter_mut().take(n) {
                    *c = rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        if matches!(simplex_gamma(&pts, n), Ok(g) if g <= 50.0) {
            break pts;
        }
    };
    let volume = signed_volume(&pts, n).abs();
    let count = rng.gen_range(1..=4);
    let factors: Vec<[f64; 4]> = (0..count)
        .map(|_| {
            let mut f = [0.0; 4];
            for v in f.iter_mut().take(n + 1) {
                *v = rng.gen_range(-1.0..1.0);
            }
            f
        })
        .collect();
    let ratio = prod_rearrange_ratio(volume, n, &factors);
    let rec = InequalityRecord::new("prod_rearrange", 1.0, ratio)
        .param("dim", n)
        .param("factors", count)
        .param("max_over_mean", ratio);
    (rec, ratio.is_finite() && ratio >= 1.0 - 1e-12)
}

fn fast_geometric_trial(rng: &mut ChaCha8Rng) -> Result<(InequalityRecord, bool)> {
    let c: f64 = rng.gen_range(0.5..5.0);
    let b: f64 = rng.gen_range(1.1..4.0);
    let alpha: f64 = rng.gen_range(0.2..2.0);
    let mut a = vec![rng.gen_range(0.0..=1.0) * c.powf(-1.0 / alpha) * b.powf(-1.0 / (alpha * alpha))];
    for k in 0..30 {
        let cap = c * b.powi(k) * a[k as usize].powf(1.0 + alpha);
        a.push(rng.gen_range(0.0..=1.0) * cap);
    }
    let rep = fast_geometric_bound(c, b, alpha, &a)?;
    let worst = a
        .iter()
        .zip(&rep.bounds)
        .filter(|(_, &bd)| bd > 0.0)
        .map(|(x, bd)| x / bd)
        .fold(0.0, f64::max);
    let rec = InequalityRecord::new("fast_geometric", worst, 1.0)
        .param("c", c)
        .param("b", b)
        .param("alpha", alpha);
    Ok((rec, rep.first_violation.is_none() && rep.converges && rep.within_bound))
}

fn telescoping_trial(rng: &mut ChaCha8Rng) -> Result<(InequalityRecord, bool)> {
    let len = 40;
    let c: Vec<f64> = (0..len).map(|_| rng.gen_range(0.1..10.0)).collect();
    let mut a = vec![0.0, rng.gen_range(0.0..5.0)];
    for k in 1..len - 1 {
        let root = 2.0 * c[k] * a[k] / (c[k] + (c[k] * c[k] + 4.0 * c[k] * a[k]).sqrt());
        a.push(rng.gen_range(0.0..=1.0) * root);
    }
    let rep = telescoping_bound(&c, &a)?;
    let worst = a
        .iter()
        .zip(&rep.envelope)
        .filter(|(_, e)| e.is_finite() && **e > 0.0)
        .map(|(x, e)| x / e)
        .fold(0.0, f64::max);
    let rec = InequalityRecord::new("telescoping", worst, 1.0).param("a1", a[1]);
    Ok((rec, rep.first_violation.is_none() && rep.within_envelope))
}
