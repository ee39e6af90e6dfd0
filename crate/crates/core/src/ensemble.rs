//! Parallel ensemble runner.
//!
//! Member `i` always receives index `i`, and results come back in index
//! order, so anything computed from them is independent of the number of
//! worker threads. Use a scoped [`rayon::ThreadPool`] to bound the workers.

use rayon::prelude::*;

use crate::error::Result;

/// Runs `member(i)` for `i in 0..count` and returns the results in index
/// order. On failure the error of the lowest failing index is returned.
pub fn run_indexed<T, F>(count: usize, member: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..count).into_par_iter().map(|i| member(i as u64)).collect();
    results.into_iter().collect()
}
