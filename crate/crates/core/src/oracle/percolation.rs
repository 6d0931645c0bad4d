//! Static sampler of the graph at a fixed time: each edge `{i, j}` is present
//! independently with probability `1 - exp(-t z_i z_j)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mass::MassVector;

/// Default cap on the number of vertices; the sampler is `O(kappa^2)`.
pub const PERCOLATION_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    sets: usize,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns `true` if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.sets -= 1;
        true
    }

    pub fn set_count(&self) -> usize {
        self.sets
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolationSample {
    pub k: usize,
    /// Component masses, non-increasing.
    pub component_masses: Vec<f64>,
}

pub fn percolation_sample<R: Rng + ?Sized>(mv: &MassVector, t: f64, rng: &mut R) -> Result<PercolationSample> {
    percolation_sample_capped(mv, t, rng, PERCOLATION_CAP)
}

pub fn percolation_sample_capped<R: Rng + ?Sized>(
    mv: &MassVector,
    t: f64,
    rng: &mut R,
    cap: usize,
) -> Result<PercolationSample> {
    if !(t >= 0.0) {
        return Err(Error::NegativeHorizon(t));
    }
    let z = mv.masses();
    if z.len() > cap {
        return Err(Error::StateSpaceTooLarge {
            kappa: z.len(),
            limit: cap,
        });
    }
    let mut sets = DisjointSets::new(z.len());
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            let p = -(-t * z[i] * z[j]).exp_m1();
            if rng.random::<f64>() < p {
                sets.union(i, j);
            }
        }
    }
    let mut by_root = vec![0.0; z.len()];
    for (i, &m) in z.iter().enumerate() {
        let r = sets.find(i);
        by_root[r] += m;
    }
    let mut component_masses: Vec<f64> = by_root.into_iter().filter(|&m| m > 0.0).collect();
    component_masses.sort_by(|a, b| b.total_cmp(a));
    Ok(PercolationSample {
        k: sets.set_count(),
        component_masses,
    })
}
