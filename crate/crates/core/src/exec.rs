//! Order-preserving batch execution.
//!
//! With the `parallel` feature (on by default) work is spread over a bounded
//! rayon pool; without it, or with [`Executor::sequential`], items are
//! processed in order on the calling thread. Results are always returned in
//! input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_PARALLELISM: usize = 4;

pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    pub fn sequential() -> Self {
        Executor {
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// A pool of `threads` workers, or sequential execution when `threads <= 1`
    /// or the crate was built without the `parallel` feature.
    pub fn with_parallelism(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if threads > 1 {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(|i| format!("simrag-worker-{i}"))
                    .build()
                    .expect("failed to start worker pool");
                return Executor { pool: Some(pool) };
            }
        }
        let _ = threads;
        Executor::sequential()
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Applies `f` to every item, returning results in input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Executor::with_parallelism(DEFAULT_PARALLELISM)
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("parallel", &self.is_parallel())
            .finish()
    }
}
