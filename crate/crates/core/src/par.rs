//! Execution policy for the data-parallel parts of the crate.
//!
//! Two kinds of work are parallelised: row loops of the 2D stencils (only
//! above [`PAR_ROW_THRESHOLD`] nodes) and fan-out over independent
//! simulations. Reductions always run sequentially so results are
//! bitwise identical for every policy and thread count.
//!
//! Without the `parallel` feature every policy falls back to sequential
//! iteration.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Node count below which stencil loops never fan out.
pub const PAR_ROW_THRESHOLD: usize = 16_384;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this policy will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Fill `out` row by row, where a row is a contiguous chunk of `row_len`
/// entries and `f(row_index, row)` writes one row.
pub(crate) fn for_each_row<F>(exec: Execution, out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() >= PAR_ROW_THRESHOLD && out.len() > row_len {
        out.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(j, row)| f(j, row));
        return;
    }
    let _ = exec;
    out.chunks_mut(row_len)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

/// Map a function over independent work items, preserving input order.
pub fn map_items<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(&f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
