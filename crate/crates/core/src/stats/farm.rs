//! Parallel replica runner. Each replica draws its own noise from
//! `replica_seed(base_seed, index)` and results come back in replica order,
//! so nothing depends on the thread schedule.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::SpatialKernel;
use crate::noise::NoiseSampler;
use crate::rng::replica_seed;
use crate::sigma::SigmaSpec;
use crate::solver::SpectralSolver;

#[derive(Debug, Clone)]
pub struct ReplicaFarm {
    kernel: SpatialKernel,
    sigma: SigmaSpec,
    grid: Grid,
    sampler: NoiseSampler,
    solver: SpectralSolver,
}

impl ReplicaFarm {
    pub fn new(kernel: &SpatialKernel, sigma: &SigmaSpec, grid: &Grid) -> Result<Self> {
        if kernel.dim() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            kernel: *kernel,
            sigma: *sigma,
            grid: *grid,
            sampler: NoiseSampler::new(kernel, grid)?,
            solver: SpectralSolver::new(grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn kernel(&self) -> &SpatialKernel {
        &self.kernel
    }
    pub fn sigma(&self) -> &SigmaSpec {
        &self.sigma
    }
    pub fn sampler(&self) -> &NoiseSampler {
        &self.sampler
    }

    /// For every replica, solve once and evaluate `functional(k, u)` at each
    /// time index `time_indices[k]`. Returns `out[replica][k]`.
    pub fn run<T, F>(&self, replicas: usize, base_seed: u64, time_indices: &[usize], functional: F) -> Result<Vec<Vec<T>>>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        for &n in time_indices {
            if n > self.grid.n_steps() {
                return Err(Error::IndexOutOfRange {
                    index: n,
                    len: self.grid.n_steps() + 1,
                });
            }
        }
        (0..replicas)
            .into_par_iter()
            .map_init(
                || self.solver.work(),
                |work, r| {
                    let noise = self.sampler.increments(replica_seed(base_seed, r as u64));
                    let mut slots: Vec<Option<T>> = (0..time_indices.len()).map(|_| None).collect();
                    self.solver.run(
                        &self.sigma,
                        &noise,
                        work,
                        |n| time_indices.contains(&n),
                        |n, u| {
                            for (k, &tn) in time_indices.iter().enumerate() {
                                if tn == n {
                                    slots[k] = Some(functional(k, u));
                                }
                            }
                        },
                    )?;
                    Ok(slots.into_iter().map(|s| s.expect("observed")).collect())
                },
            )
            .collect()
    }

    /// Like [`run`](Self::run) but hands `reduce` copies of all requested
    /// slices of one replica at once, e.g. for cross-time statistics.
    pub fn run_snapshots<T, F>(&self, replicas: usize, base_seed: u64, time_indices: &[usize], reduce: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(&[Vec<f64>]) -> T + Sync,
    {
        let rows = self.run(replicas, base_seed, time_indices, |_, u| u.to_vec())?;
        Ok(rows.into_iter().map(|r| reduce(&r)).collect())
    }
}

/// Run `f` inside a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: usize, f: F) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
