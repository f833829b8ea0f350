use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::par::{dot, Execution};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative preconditioned-free residual `‖b - Ax‖ / ‖b‖` per iteration.
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite matrix.
pub fn pcg(
    exec: Execution,
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = dot(exec, b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(exec, &r, &z);
    let mut history = vec![1.0];
    for it in 1..=max_iter {
        a.matvec_into(exec, &p, &mut ap);
        let pap = dot(exec, &p, &ap);
        if pap <= 0.0 {
            return Err(Error::SolverFailure {
                iterations: it,
                final_residual: *history.last().unwrap(),
                history,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(exec, &r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            // confirm with the true residual to guard against drift
            a.matvec_into(exec, &x, &mut ap);
            let true_rel = ap
                .iter()
                .zip(b)
                .map(|(ax, bi)| (bi - ax) * (bi - ax))
                .sum::<f64>()
                .sqrt()
                / bnorm;
            if true_rel <= tol {
                return Ok(CgOutcome {
                    x,
                    iterations: it,
                    history,
                });
            }
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(exec, &r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        final_residual: *history.last().unwrap(),
        history,
    })
}
