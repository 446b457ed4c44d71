//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the embarrassingly parallel loops —
//! Monte-Carlo draws, sample sweeps, per-node quadrature batches — run on
//! rayon; without it they run sequentially. Reductions always happen in index
//! order, so results are bit-identical across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn par_map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Runs `f` inside a rayon pool with `threads` workers (sequential build:
/// plain call). Used by the benches to compare thread counts and by the CLI
/// to honor `SEMIHEAT_THREADS`.
pub fn run_with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Thread cap requested via the `SEMIHEAT_THREADS` environment variable, if
/// set to a positive integer.
pub fn env_thread_cap() -> Option<usize> {
    std::env::var("SEMIHEAT_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_deterministic() {
        let a = par_map_indexed(100, |i| i * i);
        let b: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn thread_override_runs() {
        let v = run_with_threads(1, || par_map_indexed(10, |i| i + 1));
        assert_eq!(v[9], 10);
    }
}
