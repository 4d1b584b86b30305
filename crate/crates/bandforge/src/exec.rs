//! Thread-pool executor.

use bandforge_core::exec::Executor;
use rayon::prelude::*;

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "BANDFORGE_THREADS";

/// Runs work items on a dedicated rayon pool.
pub struct Rayon {
    pool: rayon::ThreadPool,
}

impl Rayon {
    /// Pool with `threads` workers; `None` or 0 lets rayon pick.
    pub fn new(threads: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// Thread count from the flag, else from `BANDFORGE_THREADS`.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|_| format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'"))
        }
        _ => Ok(None),
    }
}
