//! Multi-threaded batch execution.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use tbs_noma_core::sim::{run_batch, BatchCounts, BatchExecutor, BatchSpec, SimContext, SlotRng};

use crate::error::CliError;

/// Runs each wave of batches on a dedicated rayon pool.
pub struct RayonExecutor {
    pool: ThreadPool,
    workers: usize,
}

impl RayonExecutor {
    /// Batches per wave for each worker; more keeps workers busy, fewer
    /// wastes less work past the stopping batch.
    const BATCHES_PER_WORKER: usize = 2;

    pub fn new(workers: usize) -> Result<Self, CliError> {
        let workers = workers.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
        Ok(RayonExecutor { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

impl BatchExecutor for RayonExecutor {
    fn wave_size(&self) -> usize {
        self.workers * Self::BATCHES_PER_WORKER
    }

    fn run_wave(&self, ctx: &SimContext, rng: &SlotRng, batches: &[BatchSpec]) -> Vec<BatchCounts> {
        self.pool.install(|| batches.par_iter().map(|b| run_batch(ctx, rng, b)).collect())
    }
}

/// Worker count when none is given.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
