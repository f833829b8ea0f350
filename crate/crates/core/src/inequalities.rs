//! Ratio engines for the discrete inequalities: Caccioppoli, Poincaré on patches
//! and on unions of elements, the weak-type level-set bound, the Jensen property
//! of the nodal interpolant, product rearrangement and the product commutator.

use std::collections::HashMap;
use std::fmt;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::fem::{nodal_positive_part, product_commutator_defect, FeFunction, LoadData};
use crate::geometry::{dist, factorial, norm, Point};
use crate::integrate::{abs_integral, abs_product_integral, power_integral, product_integral, square_integral};
use crate::mesh::Triangulation;

pub mod suite;

pub use suite::{run_lemma_suite, Lemma, LemmaTrial};

/// Below this both sides count as zero.
pub const ZERO_TOLERANCE: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecordFlag {
    /// `rhs = 0` while `lhs` is not.
    Violation,
    /// The hypothesis of the inequality fails; the record is informational.
    HypothesisNotMet,
}

#[derive(Clone, Debug)]
pub struct InequalityRecord {
    pub name: String,
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; zero when both vanish, infinite for a flagged violation.
    pub ratio: f64,
    pub params: Map<String, Value>,
    pub flag: Option<RecordFlag>,
}

impl InequalityRecord {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let (ratio, flag) = if rhs > ZERO_TOLERANCE {
            (lhs / rhs, None)
        } else if lhs <= ZERO_TOLERANCE {
            (0.0, None)
        } else {
            (f64::INFINITY, Some(RecordFlag::Violation))
        };
        InequalityRecord {
            name: name.into(),
            level: 0,
            lhs,
            rhs,
            ratio,
            params: Map::new(),
            flag,
        }
    }

    pub fn at_level(mut self, level: usize) -> Self {
        self.level = level;
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn skipped(&self) -> bool {
        self.flag == Some(RecordFlag::HypothesisNotMet)
    }

    pub fn is_violation(&self) -> bool {
        self.flag == Some(RecordFlag::Violation)
    }

    pub const CSV_HEADER: &'static str = "name,level,lhs,rhs,ratio,param_json";

    pub fn csv_row(&self) -> String {
        let mut params = self.params.clone();
        match self.flag {
            Some(RecordFlag::Violation) => {
                params.insert("flag".into(), json!("violation"));
            }
            Some(RecordFlag::HypothesisNotMet) => {
                params.insert("flag".into(), json!("hypothesis-not-met"));
            }
            None => {}
        }
        let pj = Value::Object(params).to_string().replace('"', "\"\"");
        format!(
            "{},{},{:e},{:e},{:e},\"{}\"",
            self.name, self.level, self.lhs, self.rhs, self.ratio, pj
        )
    }
}

impl fmt::Display for InequalityRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_row())
    }
}

pub fn records_to_csv(records: &[InequalityRecord]) -> String {
    let mut s = String::from(InequalityRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// `max_level ratio ≤ factor · max_{first three levels} ratio`.
pub fn uniformity_holds(ratios: &[f64], factor: f64) -> bool {
    if ratios.is_empty() {
        return true;
    }
    let head = ratios.iter().take(3).cloned().fold(0.0, f64::max);
    let all = ratios.iter().cloned().fold(0.0, f64::max);
    all <= factor * head
}

fn cells_with_nonzero(mesh: &Triangulation, v: &FeFunction) -> Vec<bool> {
    (0..mesh.num_cells())
        .map(|t| mesh.cell(t).iter().any(|&i| v.values()[i] != 0.0))
        .collect()
}

fn cells_with_nonzero_both(mesh: &Triangulation, v: &FeFunction, w: &FeFunction) -> f64 {
    let sv = cells_with_nonzero(mesh, v);
    let sw = cells_with_nonzero(mesh, w);
    (0..mesh.num_cells())
        .filter(|&t| sv[t] && sw[t])
        .map(|t| mesh.volume(t))
        .sum()
}

/// Discrete Caccioppoli inequality for the truncation `w = (u - c)_+`:
///
/// `∫|∇w|²η² ≤ C [∫w²|∇η|² + (‖G‖_p² + ‖f‖_q²)(‖∇η‖²_{L²(supp w)} + ‖η‖²_{L^{2*}(supp w)}) |supp η ∩ supp w|^{2δ/n}]`.
///
/// `load` is the data of `u`; the truncation is a subsolution for `(|f|, G)`.
/// The data norms are taken over `supp η`, the only region the test function sees.
pub fn caccioppoli_ratio(
    mesh: &Triangulation,
    u: &FeFunction,
    c: f64,
    eta: &FeFunction,
    load: &LoadData,
) -> Result<InequalityRecord> {
    u.check_mesh(mesh)?;
    eta.check_mesh(mesh)?;
    if eta.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidOperand("cutoff has negative nodal values".into()));
    }
    let n = mesh.dim();
    let w = nodal_positive_part(u, c);
    let supp_w = cells_with_nonzero(mesh, &w);
    let two_star = LoadData::two_star(n);
    let m = two_star.round() as usize;
    let mut lhs = 0.0;
    let mut energy = 0.0;
    let mut grad_eta_sq = 0.0;
    let mut eta_pow = 0.0;
    for t in 0..mesh.num_cells() {
        if !supp_w[t] {
            continue;
        }
        let vol = mesh.volume(t);
        let ev = eta.cell_values(mesh, t);
        let wv = w.cell_values(mesh, t);
        let gw = norm(&w.gradient(mesh, t));
        let ge = norm(&eta.gradient(mesh, t));
        lhs += gw * gw * square_integral(vol, n, &ev);
        energy += ge * ge * square_integral(vol, n, &wv);
        grad_eta_sq += ge * ge * vol;
        eta_pow += power_integral(vol, n, &ev, m);
    }
    let supp_eta = cells_with_nonzero(mesh, eta);
    let data = load.dominating_norm_p_on(mesh, &supp_eta).powi(2) + load.f_norm_q_on(mesh, &supp_eta).powi(2);
    let overlap = cells_with_nonzero_both(mesh, eta, &w);
    let delta = load.delta();
    let weight = eta_pow.max(0.0).powf(2.0 / two_star);
    let rhs = energy + data * (grad_eta_sq + weight) * overlap.powf(2.0 * delta / n as f64);
    Ok(InequalityRecord::new("caccioppoli", lhs, rhs)
        .param("c", c)
        .param("energy_term", energy)
        .param("data_term", rhs - energy)
        .param("mesh_id", mesh.id()))
}

/// `∫_{P_i}|v| / (h_i ∫_{P_i}|∇v|)` with `h_i` the largest diameter in the patch.
pub fn poincare_patch_ratio(mesh: &Triangulation, v: &FeFunction, i: usize) -> Result<InequalityRecord> {
    v.check_mesh(mesh)?;
    if i >= mesh.num_nodes() {
        return Err(Error::InvalidOperand(format!("node {i} out of range")));
    }
    let n = mesh.dim();
    let patch = mesh.node_cells(i);
    let has_zero = patch
        .iter()
        .any(|&t| mesh.cell(t).iter().any(|&j| v.values()[j] == 0.0));
    if !has_zero {
        return Err(Error::InvalidOperand(format!(
            "function has no zero node on the closed patch of node {i}"
        )));
    }
    let h = patch.iter().map(|&t| mesh.diameter(t)).fold(0.0, f64::max);
    let mut lhs = 0.0;
    let mut grad = 0.0;
    for &t in patch {
        let vol = mesh.volume(t);
        lhs += abs_integral(vol, n, &v.cell_values(mesh, t));
        grad += vol * norm(&v.gradient(mesh, t));
    }
    Ok(InequalityRecord::new("poincare_patch", lhs, h * grad)
        .param("node", i)
        .param("h", h))
}

/// Diameter of a union of elements, attained at vertices on its boundary.
pub fn region_diameter(mesh: &Triangulation, region: &[usize]) -> f64 {
    let n = mesh.dim();
    let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
    for &t in region {
        let cell = mesh.cell(t);
        for skip in 0..=n {
            let mut f: Vec<usize> = (0..=n).filter(|&k| k != skip).map(|k| cell[k]).collect();
            f.sort_unstable();
            *count.entry(f).or_insert(0) += 1;
        }
    }
    let mut nodes: Vec<usize> = count
        .into_iter()
        .filter(|(_, c)| *c == 1)
        .flat_map(|(f, _)| f)
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let pts: Vec<Point> = nodes.iter().map(|&i| *mesh.point(i)).collect();
    let mut d = 0.0_f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            d = d.max(dist(&pts[a], &pts[b]));
        }
    }
    d
}

/// Poincaré inequality on a union of elements `A` for nonnegative `v`:
/// `∫_A|v| / (R ∫_A|∇v|)` with `R = diam A`. The record is flagged as skipped when
/// `|A ∩ ⋃_{v(x_i)=0} P_i| < γ|A|`.
pub fn poincare_vh_ratio(
    mesh: &Triangulation,
    v: &FeFunction,
    region: &[usize],
    gamma: f64,
) -> Result<InequalityRecord> {
    v.check_mesh(mesh)?;
    if v.values().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidOperand("function must be nonnegative".into()));
    }
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = mesh.dim();
    let mut area = 0.0;
    let mut zero_area = 0.0;
    let mut lhs = 0.0;
    let mut grad = 0.0;
    for &t in region {
        let vol = mesh.volume(t);
        area += vol;
        if mesh.cell(t).iter().any(|&i| v.values()[i] == 0.0) {
            zero_area += vol;
        }
        lhs += abs_integral(vol, n, &v.cell_values(mesh, t));
        grad += vol * norm(&v.gradient(mesh, t));
    }
    let measured = zero_area / area;
    let r = region_diameter(mesh, region);
    let mut rec = InequalityRecord::new("poincare_vh", lhs, r * grad)
        .param("gamma", measured)
        .param("gamma_required", gamma)
        .param("diameter", r);
    if measured < gamma {
        rec.flag = Some(RecordFlag::HypothesisNotMet);
    }
    Ok(rec)
}

/// Constant `C_n = (n+4)!/(4 n!)` of the certified weak-type bound.
pub fn weak_type_constant(n: usize) -> f64 {
    factorial(n + 4) / (4.0 * factorial(n))
}

/// Weak-type level-set bound for nodal truncations
/// `A_k = {η_k² (u - λ_k - c_0)_+² > 0}`, `λ_k = (1 - 2^{-k}) λ_∞`:
///
/// `|A_{k+1}| ≤ C_n 2^{2(k+1)} λ_∞^{-2} ∫ η_k² (u - λ_k - c_0)_+²`,
///
/// since `λ_{k+1} - λ_k = 2^{-(k+1)} λ_∞`. The record's `rhs` includes `C_n`;
/// `literal_ratio` reports `lhs` against `2^{2k} λ_∞^{-2} ∫ η_k² (u - λ_k - c_0)_+²`.
/// Requires `η_k = 1` at every node where `η_{k+1} > 0`.
pub fn weak_type_check(
    mesh: &Triangulation,
    u: &FeFunction,
    c0: f64,
    k: u32,
    lambda_inf: f64,
    eta_k: &FeFunction,
    eta_next: &FeFunction,
) -> Result<InequalityRecord> {
    u.check_mesh(mesh)?;
    eta_k.check_mesh(mesh)?;
    eta_next.check_mesh(mesh)?;
    if !(lambda_inf > 0.0) {
        return Err(Error::InvalidOperand("lambda_inf must be positive".into()));
    }
    let nested = eta_next
        .values()
        .iter()
        .zip(eta_k.values())
        .all(|(&b, &a)| b <= 0.0 || a == 1.0);
    if !nested || eta_k.values().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidOperand("cutoffs are not nested".into()));
    }
    let n = mesh.dim();
    let lam = |j: u32| (1.0 - 0.5f64.powi(j as i32)) * lambda_inf;
    let w_k = nodal_positive_part(u, lam(k) + c0);
    let w_next = nodal_positive_part(u, lam(k + 1) + c0);
    let lhs = cells_with_nonzero_both(mesh, eta_next, &w_next);
    let mut energy = 0.0;
    for t in 0..mesh.num_cells() {
        let e = eta_k.cell_values(mesh, t);
        let w = w_k.cell_values(mesh, t);
        if e[..=n].iter().all(|&x| x == 0.0) || w[..=n].iter().all(|&x| x == 0.0) {
            continue;
        }
        energy += product_integral(mesh.volume(t), n, &[e, e, w, w]);
    }
    let literal = 4f64.powi(k as i32) / (lambda_inf * lambda_inf) * energy;
    let cn = weak_type_constant(n);
    let literal_ratio = if literal > 0.0 { lhs / literal } else { 0.0 };
    Ok(InequalityRecord::new("weak_type", lhs, 4.0 * cn * literal)
        .param("k", k)
        .param("lambda_inf", lambda_inf)
        .param("c0", c0)
        .param("constant", cn)
        .param("literal_ratio", literal_ratio))
}

/// Barycentric lattice points `{β / m : |β| = m}` of an `n`-simplex.
pub fn lattice_points(n: usize, m: usize) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    let mut idx = [0usize; 4];
    fn rec(n: usize, m: usize, pos: usize, left: usize, idx: &mut [usize; 4], out: &mut Vec<[f64; 4]>) {
        if pos == n {
            idx[n] = left;
            let mut l = [0.0; 4];
            for k in 0..=n {
                l[k] = idx[k] as f64 / m as f64;
            }
            out.push(l);
            return;
        }
        for a in 0..=left {
            idx[pos] = a;
            rec(n, m, pos + 1, left - a, idx, out);
        }
    }
    rec(n, m, 0, m, &mut idx, &mut out);
    out
}

/// Jensen property `η^q ≤ Πh(η^q)` for nonnegative `η`, sampled on a barycentric
/// lattice of order `m` in every element. `lhs` is the largest violation
/// `max(η^q - Πh(η^q), 0)`, `rhs` the tolerance `10^{-12} max(1, max η^q)`.
pub fn jensen_audit(mesh: &Triangulation, eta: &FeFunction, q: u32, m: usize) -> Result<InequalityRecord> {
    eta.check_mesh(mesh)?;
    if eta.values().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidOperand("function must be nonnegative".into()));
    }
    let n = mesh.dim();
    let pts = lattice_points(n, m.max(1));
    let mut min_defect = f64::INFINITY;
    for t in 0..mesh.num_cells() {
        let v = eta.cell_values(mesh, t);
        for l in &pts {
            let val: f64 = (0..=n).map(|k| l[k] * v[k]).sum();
            let interp: f64 = (0..=n).map(|k| l[k] * v[k].powi(q as i32)).sum();
            min_defect = min_defect.min(interp - val.powi(q as i32));
        }
    }
    let scale = eta.max_abs().powi(q as i32).max(1.0);
    Ok(InequalityRecord::new("jensen", (-min_defect).max(0.0), 1e-12 * scale)
        .param("q", q)
        .param("min_defect", min_defect))
}

/// Interpolation stability `max_T|g - Πh g| + h_T max_T|∇Πh g| ≲ h_T max_T|∇g|`,
/// sampled on a lattice of order `m`; the record holds the worst element.
pub fn interpolation_stability(
    mesh: &Triangulation,
    g: impl Fn(&Point) -> f64,
    grad_g: impl Fn(&Point) -> Point,
    m: usize,
) -> Result<InequalityRecord> {
    let n = mesh.dim();
    let pi = crate::fem::interpolate(mesh, &g)?;
    let pts = lattice_points(n, m.max(1));
    let mut worst = (0.0, 0.0, 0.0);
    for t in 0..mesh.num_cells() {
        let p = mesh.cell_points(t);
        let v = pi.cell_values(mesh, t);
        let h = mesh.diameter(t);
        let mut err = 0.0_f64;
        let mut grad = 0.0_f64;
        for l in &pts {
            let mut x = [0.0; 3];
            for k in 0..=n {
                for a in 0..3 {
                    x[a] += l[k] * p[k][a];
                }
            }
            let val: f64 = (0..=n).map(|k| l[k] * v[k]).sum();
            err = err.max((g(&x) - val).abs());
            grad = grad.max(norm(&grad_g(&x)));
        }
        let lhs = err + h * norm(&pi.gradient(mesh, t));
        let rhs = h * grad;
        let r = if rhs > 0.0 { lhs / rhs } else { 0.0 };
        if r >= worst.2 {
            worst = (lhs, rhs, r);
        }
    }
    Ok(InequalityRecord::new("interpolation_stability", worst.0, worst.1))
}

/// `Π_j max_T|a_j| / ⨍_T|Π_j a_j|` for affine factors given by vertex values.
/// Always at least one; bounded above in terms of the shape of `T` and the number of factors.
pub fn prod_rearrange_ratio(volume: f64, n: usize, factors: &[[f64; 4]]) -> f64 {
    let maxes: f64 = factors
        .iter()
        .map(|f| f[..=n].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
        .product();
    let mean = abs_product_integral(volume, n, factors) / volume;
    if maxes == 0.0 {
        0.0
    } else {
        maxes / mean
    }
}

/// Largest element constant of the product commutator bound
/// `max_T|uw - Πh(uw)| + h_T max_T|∇(uw - Πh(uw))| ≲ h_T ⨍|∇u| ⨍|w - <w>|`.
pub fn commutator_ratio(mesh: &Triangulation, u: &FeFunction, w: &FeFunction) -> Result<InequalityRecord> {
    let defects = product_commutator_defect(mesh, u, w)?;
    let mut worst = (0.0, 0.0, 0.0);
    for d in defects {
        let lhs = d.max_defect + d.max_grad_defect;
        if d.constant >= worst.2 && d.rhs > 0.0 {
            worst = (lhs, d.rhs, d.constant);
        }
    }
    Ok(InequalityRecord::new("commutator", worst.0, worst.1))
}
