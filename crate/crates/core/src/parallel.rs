//! Order-preserving parallel map over work-item indices.
//!
//! Results come back indexed by item, and callers reduce them sequentially, so
//! the worker count never changes the output.

use rayon::prelude::*;

/// `0` uses rayon's global pool, `1` runs inline, `n > 1` uses a dedicated pool of `n` threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Workers(pub usize);

impl Workers {
    pub const SEQUENTIAL: Workers = Workers(1);

    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self.0 {
            1 => (0..n).map(f).collect(),
            0 => (0..n).into_par_iter().map(f).collect(),
            threads => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(_) => (0..n).map(f).collect(),
            },
        }
    }
}
