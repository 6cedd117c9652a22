//! Rayon-backed grid executor.

use confinv_core::variation::{GridExecutor, NodeSample};
use confinv_core::Result;
use rayon::prelude::*;
use rayon::ThreadPool;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "CONFINV_THREADS";

pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Parallel {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool");
        Parallel { pool }
    }

    /// Worker count from `CONFINV_THREADS`, else rayon's default.
    pub fn from_env() -> Parallel {
        let threads = std::env::var(THREADS_ENV).ok().and_then(|s| s.trim().parse::<usize>().ok()).unwrap_or(0);
        Parallel::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Runs `f` over `0..count` on the pool, keeping index order.
    pub fn map<T: Send>(&self, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

impl GridExecutor for Parallel {
    fn run(&self, count: usize, f: &(dyn Fn(usize) -> Result<NodeSample> + Sync)) -> Result<Vec<NodeSample>> {
        // results come back in index order, so the reduction downstream does not
        // depend on scheduling
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}
