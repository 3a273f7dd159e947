#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for embarrassingly parallel node loops.
///
/// Results are bit-identical across modes: parallel loops assign by index
/// (one output row per input row) and each row's reduction is sequential, so
/// no floating-point reassociation takes place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecutionMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        ExecutionMode::Parallel
    }

    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        ExecutionMode::Sequential
    }
}

/// Maps `f` over `0..n`, collecting outputs in index order.
pub fn map_range<T, F>(mode: ExecutionMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    match mode {
        ExecutionMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

/// Fallible variant of [`map_range`]; the first error wins.
pub fn try_map_range<T, E, F>(mode: ExecutionMode, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Send + Sync,
{
    match mode {
        ExecutionMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}
