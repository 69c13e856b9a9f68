//! Worker-pool plumbing. The pool size comes from SIRST_THREADS when set,
//! otherwise the machine's parallelism. All parallel reductions in this crate
//! collect per-index results and fold them in index order, so the pool size
//! never changes numeric output, only wall time.

use std::sync::OnceLock;

use rayon::ThreadPool;

pub const THREADS_ENV: &str = "SIRST_THREADS";

pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(worker_count())
            .build()
            .expect("worker pool construction")
    })
}

/// Run a closure inside the crate's worker pool; rayon parallel iterators
/// inside it use that pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

/// Map `f` over 0..n on the pool and return results in index order.
pub fn ordered_map<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    use rayon::prelude::*;
    install(|| (0..n).into_par_iter().map(|i| f(i)).collect())
}
