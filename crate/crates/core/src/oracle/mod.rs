//! Independent ground truth for the event-driven engine: a static
//! percolation sampler and the exact law of `K(t)` on small instances.

pub mod ode;
pub mod partition;
pub mod percolation;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::MassVector;
use crate::rng::StreamSeed;

pub use partition::{PartitionChain, MAX_CHAIN_COMPONENTS};
pub use percolation::{percolation_sample, PercolationSample, PERCOLATION_CAP};

/// Local error tolerance of the forward-equation integrator.
pub const ODE_TOLERANCE: f64 = 1e-10;

/// Law of `K(t)`: `probs[k - 1] = P(K(t) = k)` for `k = 1..=kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDistribution {
    pub t: f64,
    pub probs: Vec<f64>,
}

impl KDistribution {
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Probabilities indexed directly by `k`, with a leading zero for `k = 0`.
    pub fn by_k(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.probs.iter().copied()).collect()
    }
}

/// Exact `P(K(t) = k)` from the forward equations of the partition chain.
pub fn exact_k_distribution(mv: &MassVector, t: f64) -> Result<KDistribution> {
    if !(t >= 0.0) {
        return Err(Error::NegativeHorizon(t));
    }
    let chain = PartitionChain::new(mv)?;
    let mut p0 = vec![0.0; chain.len()];
    p0[chain.initial_state()] = 1.0;
    let max_rate = (0..chain.len()).map(|s| chain.exit_rate(s)).fold(0.0, f64::max);
    let h0 = if max_rate > 0.0 { 0.01 / max_rate } else { t };
    let (p, stats) = ode::integrate(|y, dy| chain.forward(y, dy), &p0, t, ODE_TOLERANCE, h0)?;

    if stats.max_mass_drift > 1e-8 {
        return Err(Error::Integration(format!(
            "probability drift {} exceeds 1e-8",
            stats.max_mass_drift
        )));
    }
    if stats.min_component < -1e-9 {
        return Err(Error::Integration(format!(
            "negative probability {}",
            stats.min_component
        )));
    }

    let kappa = mv.kappa();
    let mut probs = vec![0.0; kappa];
    for (s, &ps) in p.iter().enumerate() {
        probs[chain.block_count(s) - 1] += ps.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|x| *x /= total);
    Ok(KDistribution { t, probs })
}

pub fn exact_mean_k(mv: &MassVector, t: f64) -> Result<f64> {
    Ok(exact_k_distribution(mv, t)?.mean())
}

/// `K` from `reps` independent percolation samples; sample `r` uses stream `r`.
pub fn percolation_k_samples(
    mv: &MassVector,
    t: f64,
    master_seed: u64,
    reps: usize,
    workers: usize,
) -> Result<Vec<usize>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;
    pool.install(|| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = StreamSeed::new(master_seed, r as u64).rng();
                percolation_sample(mv, t, &mut rng).map(|s| s.k)
            })
            .collect()
    })
}
