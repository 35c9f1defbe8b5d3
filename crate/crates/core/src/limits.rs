//! Process-wide cap on the dimension of any single basis.

use std::sync::atomic::{AtomicUsize, Ordering};

pub const DEFAULT_MAX_BASIS: usize = 20_000;
pub const MAX_BASIS_ENV: &str = "LOOPFORMS_MAX_BASIS";

static MAX_BASIS: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_BASIS);

pub fn max_basis() -> usize {
    MAX_BASIS.load(Ordering::Relaxed)
}

pub fn set_max_basis(n: usize) {
    MAX_BASIS.store(n, Ordering::Relaxed);
}

/// Reads the environment override; `Err` carries the unparsable value.
pub fn max_basis_from_env() -> Result<usize, String> {
    match std::env::var(MAX_BASIS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| v),
        Err(_) => Ok(DEFAULT_MAX_BASIS),
    }
}
