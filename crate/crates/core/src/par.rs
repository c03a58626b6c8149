//! Order-preserving map over an index range, data-parallel with the
//! `parallel` feature. Results are collected in index order, so any
//! reduction done afterwards is independent of the thread count.

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Size the global worker pool. Must run before any parallel work; a no-op
/// without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) -> crate::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| crate::Error::Config(format!("cannot size thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn set_threads(_n: usize) -> crate::Result<()> {
    Ok(())
}
