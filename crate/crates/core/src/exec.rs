//! Data-parallel helpers.
//!
//! Every batch loop in the crate (orbit norms over a horizon, measure
//! sequences, candidate searches, randomized oracle sweeps) goes through
//! these two functions. With the `parallel` feature they fan out over the
//! rayon pool; without it, or with [`Execution::Sequential`], they run on the
//! calling thread. Results are always returned in index order, so output is
//! identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// `f(0), f(1), ..., f(len - 1)` in order.
    pub fn map_indices<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..len).into_par_iter().map(f).collect(),
            _ => (0..len).map(f).collect(),
        }
    }

    /// First item (in slice order) for which `f` returns `Some`.
    pub fn find_map_first<I, T, F>(self, items: &[I], f: F) -> Option<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> Option<T> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().find_map_first(f),
            _ => items.iter().find_map(f),
        }
    }
}
