//! Work distribution over independent units (trajectories, replicates,
//! grid points).
//!
//! Results are always returned in unit order, so reductions over them are
//! bit-identical whatever the worker count.

#[cfg(feature = "parallel")]
use std::sync::Arc;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "VARDIFF_THREADS";

#[derive(Clone)]
pub enum Executor {
    Sequential,
    /// Rayon's global pool, or a dedicated pool when one was built.
    #[cfg(feature = "parallel")]
    Parallel,
    #[cfg(feature = "parallel")]
    Pool(Arc<rayon::ThreadPool>),
}

impl Default for Executor {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Executor::Parallel;
        #[cfg(not(feature = "parallel"))]
        Executor::Sequential
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Executor::Sequential => f.write_str("Sequential"),
            #[cfg(feature = "parallel")]
            Executor::Parallel => f.write_str("Parallel"),
            #[cfg(feature = "parallel")]
            Executor::Pool(p) => write!(f, "Pool({})", p.current_num_threads()),
        }
    }
}

impl Executor {
    /// Parallel when the feature is on, honoring `VARDIFF_THREADS`
    /// (`1` selects the sequential path).
    pub fn from_env() -> Self {
        let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
        match threads {
            Some(0) | None => Executor::default(),
            Some(1) => Executor::Sequential,
            Some(n) => Executor::with_threads(n),
        }
    }

    #[cfg(feature = "parallel")]
    pub fn with_threads(n: usize) -> Self {
        match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => Executor::Pool(Arc::new(pool)),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                Executor::Parallel
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn with_threads(n: usize) -> Self {
        if n > 1 {
            log::warn!("built without the `parallel` feature; running sequentially");
        }
        Executor::Sequential
    }

    pub fn threads(&self) -> usize {
        match self {
            Executor::Sequential => 1,
            #[cfg(feature = "parallel")]
            Executor::Parallel => rayon::current_num_threads(),
            #[cfg(feature = "parallel")]
            Executor::Pool(p) => p.current_num_threads(),
        }
    }

    /// `(0..n).map(f)` collected in index order.
    pub fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Executor::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Executor::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(feature = "parallel")]
            Executor::Pool(pool) => {
                use rayon::prelude::*;
                pool.install(|| (0..n).into_par_iter().map(f).collect())
            }
        }
    }
}
