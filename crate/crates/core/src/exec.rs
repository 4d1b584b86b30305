//! Execution strategy for independent work items.
//!
//! Replicates, candidate bandwidths and simulated datasets are indexed work
//! items whose randomness is keyed by their index (see [`crate::rng`]), so any
//! executor that returns results in index order produces identical output.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0), …, f(n − 1)` and return the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
