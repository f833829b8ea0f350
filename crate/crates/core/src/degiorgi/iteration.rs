//! Numeric forms of the scalar iteration lemmas.

use crate::error::{Error, Result};

/// Outcome of checking `a_{k+1} ≤ C b^k a_k^{1+α}` and the closed-form decay.
#[derive(Clone, Debug)]
pub struct GeometricReport {
    /// First index `k` with `a_{k+1} > C b^k a_k^{1+α}`.
    pub first_violation: Option<usize>,
    /// `a_0 ≤ C^{-1/α} b^{-1/α²}`.
    pub converges: bool,
    /// `C^{-1/α} b^{-(1+kα)/α²}`.
    pub bounds: Vec<f64>,
    /// Every `a_k` lies below its bound (only meaningful when `converges`).
    pub within_bound: bool,
}

/// Geometric-convergence check for a supplied sequence.
pub fn fast_geometric_bound(c: f64, b: f64, alpha: f64, a: &[f64]) -> Result<GeometricReport> {
    if !(c > 0.0 && b > 1.0 && alpha > 0.0) {
        return Err(Error::invalid(None, "need C > 0, b > 1, alpha > 0"));
    }
    if a.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid(None, "sequence must be nonnegative"));
    }
    let rel = 1e-12;
    let first_violation = (0..a.len().saturating_sub(1)).find(|&k| {
        let cap = c * b.powi(k as i32) * a[k].powf(1.0 + alpha);
        a[k + 1] > cap * (1.0 + rel)
    });
    let base = c.powf(-1.0 / alpha);
    let bounds: Vec<f64> = (0..a.len())
        .map(|k| base * b.powf(-(1.0 + k as f64 * alpha) / (alpha * alpha)))
        .collect();
    let converges = a.first().map_or(true, |&a0| a0 <= bounds[0] * (1.0 + rel));
    let within_bound = a.iter().zip(&bounds).all(|(x, y)| *x <= y * (1.0 + rel));
    Ok(GeometricReport {
        first_violation,
        converges,
        bounds,
        within_bound,
    })
}

/// Rolls out the equality recursion `a_{k+1} = C b^k a_k^{1+α}`.
pub fn geometric_rollout(c: f64, b: f64, alpha: f64, a0: f64, len: usize) -> Vec<f64> {
    let mut a = Vec::with_capacity(len);
    let mut x = a0;
    for k in 0..len {
        a.push(x);
        x = c * b.powi(k as i32) * x.powf(1.0 + alpha);
    }
    a
}

#[derive(Clone, Debug)]
pub struct TelescopingReport {
    /// First `k ≥ 1` with `a_{k+1}² > c_k (a_k - a_{k+1})`.
    pub first_violation: Option<usize>,
    /// `√(max_{i≤k} c_i) √a_1 / √k` for `k ≥ 1`, stored at index `k + 1`.
    pub envelope: Vec<f64>,
    pub within_envelope: bool,
}

/// Checks `a_{k+1}² ≤ c_k (a_k - a_{k+1})` for `k ≥ 1` and the resulting
/// `a_{k+1} ≤ √(max c_i) √a_1 / √k`. Index 0 of both sequences is unused.
pub fn telescoping_bound(c: &[f64], a: &[f64]) -> Result<TelescopingReport> {
    if c.len() < a.len().saturating_sub(1) {
        return Err(Error::invalid(None, "need c_k for every step"));
    }
    if a.iter().chain(c.iter()).any(|&x| !(x >= 0.0)) {
        return Err(Error::invalid(None, "sequences must be nonnegative"));
    }
    let tol = 1e-12;
    let mut first_violation = None;
    let mut envelope = vec![f64::INFINITY; a.len()];
    let mut within = true;
    let mut cmax = 0.0_f64;
    for k in 1..a.len().saturating_sub(1) {
        cmax = cmax.max(c[k]);
        let lhs = a[k + 1] * a[k + 1];
        let rhs = c[k] * (a[k] - a[k + 1]);
        if first_violation.is_none() && lhs > rhs + tol * (lhs.abs() + rhs.abs()) {
            first_violation = Some(k);
        }
        let env = (cmax * a[1]).sqrt() / (k as f64).sqrt();
        envelope[k + 1] = env;
        if a[k + 1] > env * (1.0 + tol) + tol {
            within = false;
        }
    }
    Ok(TelescopingReport {
        first_violation,
        envelope,
        within_envelope: within,
    })
}

/// Parameters of the `C^α` iteration: `φ(σR) ≤ (σ^{α_1} + κ) φ(R) + C R^{α_2}`.
#[derive(Clone, Copy, Debug)]
pub struct CalphaParams {
    pub sigma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa: f64,
    pub c: f64,
}

impl CalphaParams {
    /// `κ_0 = (σ^{α_2} - σ^{α_1}) / 2`.
    pub fn kappa0(&self) -> f64 {
        0.5 * (self.sigma.powf(self.alpha2) - self.sigma.powf(self.alpha1))
    }

    /// `c(σ, α_1, α_2) = 2 σ^{-2α_2} / (1 - σ^{α_1 - α_2})`, valid for `κ ≤ κ_0`.
    pub fn envelope_constant(&self) -> f64 {
        2.0 * self.sigma.powf(-2.0 * self.alpha2) / (1.0 - self.sigma.powf(self.alpha1 - self.alpha2))
    }
}

#[derive(Clone, Debug)]
pub struct CalphaFit {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest `φ(σR) - (σ^{α_1}+κ)φ(R) - C R^{α_2}` over the grid.
    pub hypothesis_excess: f64,
    pub hypothesis_holds: bool,
    /// `max φ(r) / ((r/R)^{α_2} φ(R) + C r^{α_2})` over grid pairs `r ≤ R`.
    pub measured_constant: f64,
    /// `κ ≤ κ_0`, so the lemma applies.
    pub lemma_applies: bool,
}

/// Samples `φ` on `R_j = σ^j R_1`, `j = 0..levels`, checks the one-step hypothesis
/// and measures the envelope constant.
pub fn calpha_iteration_fit(
    phi: impl Fn(f64) -> f64,
    r1: f64,
    levels: usize,
    p: CalphaParams,
) -> Result<CalphaFit> {
    if !(p.sigma > 0.0 && p.sigma < 1.0 && p.alpha1 > p.alpha2 && p.alpha2 > 0.0 && p.kappa >= 0.0 && p.c >= 0.0) {
        return Err(Error::invalid(None, "invalid C^alpha iteration parameters"));
    }
    let radii: Vec<f64> = (0..=levels).map(|j| r1 * p.sigma.powi(j as i32)).collect();
    let values: Vec<f64> = radii.iter().map(|&r| phi(r)).collect();
    if values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::invalid(None, "phi must be nonnegative"));
    }
    if values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid(None, "phi must be nondecreasing"));
    }
    let factor = p.sigma.powf(p.alpha1) + p.kappa;
    let mut excess = f64::NEG_INFINITY;
    for j in 0..levels {
        let e = values[j + 1] - factor * values[j] - p.c * radii[j].powf(p.alpha2);
        excess = excess.max(e);
    }
    let scale = values.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let hypothesis_holds = levels == 0 || excess <= 1e-12 * scale;
    let mut measured = 0.0_f64;
    for i in 0..=levels {
        for j in 0..=i {
            let (r, big) = (radii[i], radii[j]);
            let den = (r / big).powf(p.alpha2) * values[j] + p.c * r.powf(p.alpha2);
            if values[i] > 0.0 {
                measured = measured.max(if den > 0.0 { values[i] / den } else { f64::INFINITY });
            }
        }
    }
    Ok(CalphaFit {
        radii,
        values,
        hypothesis_excess: excess,
        hypothesis_holds,
        measured_constant: measured,
        lemma_applies: p.kappa <= p.kappa0(),
    })
}
