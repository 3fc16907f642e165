//! Data-parallel helpers used by every hot loop in the crate.
//!
//! With the `parallel` feature the helpers dispatch to rayon; without it (or
//! after [`set_parallel`]`(false)`) they run the same chunked loops on the
//! calling thread. Reductions always sum fixed-size chunks in index order, so
//! results are bit-identical between the two paths and independent of the
//! thread count.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for reductions and elementwise kernels.
pub const CHUNK: usize = 4096;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enable or disable the rayon path at runtime (no-op without the feature).
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// Whether the rayon path is active.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

#[cfg(feature = "parallel")]
#[inline]
fn go_parallel(len: usize) -> bool {
    parallel_enabled() && len > CHUNK
}

/// Apply `f(global_index, &mut item)` to every element.
pub fn for_each_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if go_parallel(data.len()) {
        data.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (i, v) in chunk.iter_mut().enumerate() {
                f(base + i, v);
            }
        });
        return;
    }
    for (i, v) in data.iter_mut().enumerate() {
        f(i, v);
    }
}

/// Apply `f(chunk_index, chunk)` to consecutive chunks of length `len`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && data.len() > len {
        data.par_chunks_mut(len).enumerate().for_each(|(c, chunk)| f(c, chunk));
        return;
    }
    for (c, chunk) in data.chunks_mut(len).enumerate() {
        f(c, chunk);
    }
}

/// Deterministic sum of `f(i)` over `0..n`.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    #[cfg(feature = "parallel")]
    if go_parallel(n) {
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(partial).collect();
        return parts.iter().sum();
    }
    let parts: Vec<f64> = (0..chunks).map(partial).collect();
    parts.iter().sum()
}

/// Deterministic simultaneous sums of a fixed number of accumulators.
pub fn sum_many<const K: usize, F>(n: usize, f: F) -> [f64; K]
where
    F: Fn(usize, &mut [f64; K]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut acc = [0.0; K];
        for i in lo..hi {
            f(i, &mut acc);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<[f64; K]> = if go_parallel(n) {
        (0..chunks).into_par_iter().map(partial).collect()
    } else {
        (0..chunks).map(partial).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<[f64; K]> = (0..chunks).map(partial).collect();
    let mut out = [0.0; K];
    for p in &parts {
        for k in 0..K {
            out[k] += p[k];
        }
    }
    out
}

/// Map over independent jobs, preserving order. Used for candidate batches and sweeps.
pub fn map_jobs<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && items.len() > 1 {
        return items.par_iter().map(&f).collect();
    }
    items.iter().map(f).collect()
}
