//! Thin dispatch layer between the rayon-backed data-parallel path and the
//! sequential fallback. With the `parallel` feature disabled every helper
//! degrades to a plain loop; with it enabled, work runs on a global pool
//! whose size is capped by the `SKETCHFORGE_THREADS` environment variable.

use std::cell::Cell;

#[cfg(feature = "parallel")]
use once_cell::sync::Lazy;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
static POOL: Lazy<rayon::ThreadPool> = Lazy::new(|| {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SKETCHFORGE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                builder = builder.num_threads(n);
            }
        }
    }
    builder.build().expect("worker pool")
});

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with parallel dispatch disabled on this thread. Used by the
/// benchmark suite to compare both paths within one build.
pub fn sequential_scope<R>(f: impl FnOnce() -> R) -> R {
    FORCE_SEQUENTIAL.with(|s| s.set(true));
    let r = f();
    FORCE_SEQUENTIAL.with(|s| s.set(false));
    r
}

#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
fn sequential_forced() -> bool {
    FORCE_SEQUENTIAL.with(|s| s.get())
}

/// Splits `out` into consecutive chunks of `chunk_len` and invokes
/// `f(chunk_index, chunk)` for each. Chunks are disjoint, so results are
/// identical whichever path runs.
pub fn for_each_indexed<T: Send, F>(out: &mut [T], chunk_len: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert_eq!(out.len() % chunk_len, 0);
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() && out.len() / chunk_len > 1 {
            POOL.install(|| {
                out.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(i, chunk)| f(i, chunk));
            });
            return;
        }
    }
    for (i, chunk) in out.chunks_mut(chunk_len).enumerate() {
        f(i, chunk);
    }
}

/// Parallel map over `0..n` preserving index order in the output.
pub fn map_collect<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential_forced() && n > 1 {
            return POOL.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    (0..n).map(f).collect()
}
