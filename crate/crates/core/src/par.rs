//! Data-parallel helpers that fall back to plain iteration.
//!
//! With the `parallel` feature the index maps run on rayon's pool; without
//! it they are ordinary loops. Only order-preserving maps are offered:
//! reductions are always done sequentially over the collected results so
//! that both paths produce bit-identical floating point output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces the sequential path at runtime (used by benches and equivalence tests).
pub fn set_force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// True when maps are dispatched to the thread pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

// Below this many items thread dispatch costs more than it saves.
#[cfg(feature = "parallel")]
const MIN_PARALLEL_LEN: usize = 512;

/// `(0..n).map(f).collect()`, possibly in parallel; output order is by index.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= MIN_PARALLEL_LEN && is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if items.len() >= MIN_PARALLEL_LEN && is_parallel() {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Map over independent jobs regardless of their count (coarse-grained work
/// such as whole solves); still order preserving.
pub fn map_jobs<S, T, F>(jobs: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if jobs.len() > 1 && is_parallel() {
            return jobs.par_iter().map(f).collect();
        }
    }
    jobs.iter().map(f).collect()
}
