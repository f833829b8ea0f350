//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the [`Execution::Parallel`] strategy runs on the
//! rayon pool; without it both strategies run sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluate `f` on `0..n` and collect the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Write `f(i)` into `out[i]` for every index.
pub fn fill_indexed<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => out
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i)),
        _ => out
            .iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i)),
    }
}

/// Maximum of `f` over `0..n`, or `init` for an empty range.
pub fn max_indexed<F>(exec: Execution, n: usize, init: f64, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).reduce(|| init, f64::max),
        _ => (0..n).map(f).fold(init, f64::max),
    }
}

/// Dot product; the parallel path sums fixed-size blocks in order, so the result
/// does not depend on the thread count.
pub fn dot(exec: Execution, a: &[f64], b: &[f64]) -> f64 {
    const BLOCK: usize = 4096;
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel if a.len() > BLOCK => {
            let parts: Vec<f64> = a
                .par_chunks(BLOCK)
                .zip(b.par_chunks(BLOCK))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                .collect();
            parts.iter().sum()
        }
        _ => a
            .chunks(BLOCK)
            .zip(b.chunks(BLOCK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .sum(),
    }
}
