//! Data-parallel element loops with a sequential fallback.
//!
//! Every element loop in the crate funnels through [`map_range`]. With the
//! default `parallel` feature the loop runs on the rayon pool; without it the
//! same closure runs sequentially. Callers merge per-element results in
//! element order, so the assembled numbers do not depend on the thread count
//! beyond floating-point reproducibility of the pure per-element work.

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sum of `f(i)` over `0..n`, reduced in index order chunk by chunk.
pub(crate) fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    // Chunked so the reduction order is fixed regardless of thread count.
    const CHUNK: usize = 256;
    let n_chunks = n.div_ceil(CHUNK);
    let partial = map_range(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    });
    partial.iter().sum()
}
