//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon. Without
//! it, or inside [`sequential`], they run on the calling thread. Every helper
//! returns results in index order and reductions are performed by the caller
//! over the ordered output, so results are bit-identical in both modes.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with all helpers in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

/// True when the helpers will use the rayon pool from this thread.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Number of worker threads the helpers will use.
pub fn current_num_threads() -> usize {
    #[cfg(feature = "parallel")]
    if is_parallel() {
        return rayon::current_num_threads();
    }
    1
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps over a slice, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Applies `f(chunk_index, chunk)` to consecutive mutable chunks of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Sums `f(i)` for `i in 0..n` in blocks of `block`; the block partials are
/// added in order so the result does not depend on the thread count.
pub fn block_sum<F>(n: usize, block: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let block = block.max(1);
    let nblocks = n.div_ceil(block);
    let partials = map_range(nblocks, |b| {
        let lo = b * block;
        let hi = (lo + block).min(n);
        crate::quadrature::accurate_sum((lo..hi).map(&f))
    });
    crate::quadrature::accurate_sum(partials)
}

/// Runs `f` inside a pool capped at `jobs` workers (0 means the default pool).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs > 0 && is_parallel() {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}
