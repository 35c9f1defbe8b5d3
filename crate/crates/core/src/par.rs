//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon unless parallelism
//! has been switched off at runtime with [`set_parallel`]. Without the feature
//! everything runs on the calling thread. Results are always returned in input
//! order, so output never depends on scheduling.

use std::sync::atomic::{AtomicBool, Ordering};

static ENABLED: AtomicBool = AtomicBool::new(true);

/// Enables or disables parallel evaluation for subsequent calls.
pub fn set_parallel(on: bool) {
    ENABLED.store(on, Ordering::Relaxed);
}

/// Whether the helpers will actually fan out to a thread pool.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && ENABLED.load(Ordering::Relaxed)
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
    }
    items.into_iter().map(f).collect()
}

/// Fallible variant of [`map`]; returns the first error in input order.
pub fn try_map<T, R, E, F>(items: Vec<T>, f: F) -> Result<Vec<R>, E>
where
    T: Send,
    R: Send,
    E: Send,
    F: Fn(T) -> Result<R, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}
