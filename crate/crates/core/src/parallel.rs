//! Order-preserving fan-out of independent jobs.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Applies `f` to every item on a pool of `threads` workers and returns the
/// results in input order. `threads <= 1` runs inline.
pub fn map_ordered<T, R, G>(items: &[T], threads: usize, f: G) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    G: Fn(&T) -> Result<R> + Sync + Send,
{
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| items.par_iter().map(f).collect())
}
