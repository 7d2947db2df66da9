//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (on by default) work runs on a rayon pool;
//! without it everything runs on the calling thread. Output order always
//! matches input order, so results never depend on the worker count.

/// Maps `f` over `items` on the calling thread.
pub fn sequential_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `items` in parallel, preserving order.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    sequential_map(items, f)
}

/// Runs `op` on a pool of `workers` threads (`0` = one per core). A single
/// worker, or a build without the `parallel` feature, runs it inline.
#[cfg(feature = "parallel")]
pub fn with_workers<R, OP>(workers: usize, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R, OP>(_workers: usize, op: OP) -> R
where
    R: Send,
    OP: FnOnce() -> R + Send,
{
    op()
}
