//! The multiplicative coalescent as a finite chain on set partitions of the
//! initial components.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mass::MassVector;

/// Largest number of initial components the chain will enumerate
/// (Bell(8) = 4140 states).
pub const MAX_CHAIN_COMPONENTS: usize = 8;

/// A partition of `{0, .., kappa-1}` as block bitmasks ordered by lowest
/// member.
pub type Partition = Vec<u16>;

#[derive(Debug, Clone)]
pub struct PartitionChain {
    masses: Vec<f64>,
    states: Vec<Partition>,
    /// Outgoing `(target, rate)` pairs per state.
    transitions: Vec<Vec<(usize, f64)>>,
    initial: usize,
}

fn canonical(mut blocks: Partition) -> Partition {
    blocks.sort_by_key(|b| b.trailing_zeros());
    blocks
}

/// All set partitions of `n` labelled elements, via restricted growth strings.
pub fn enumerate_partitions(n: usize) -> Vec<Partition> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<u16>, out: &mut Vec<Partition>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b] |= 1 << i;
            rec(i + 1, n, blocks, out);
            blocks[b] &= !(1 << i);
        }
        blocks.push(1 << i);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

impl PartitionChain {
    pub fn new(mv: &MassVector) -> Result<Self> {
        let kappa = mv.kappa();
        if kappa > MAX_CHAIN_COMPONENTS {
            return Err(Error::StateSpaceTooLarge {
                kappa,
                limit: MAX_CHAIN_COMPONENTS,
            });
        }
        let masses = mv.masses().to_vec();
        let states = enumerate_partitions(kappa);
        let index: HashMap<Partition, usize> = states.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let block_mass = |b: u16| -> f64 { (0..kappa).filter(|i| b & (1 << i) != 0).map(|i| masses[i]).sum() };

        let transitions = states
            .iter()
            .map(|p| {
                let mut out = Vec::with_capacity(p.len() * p.len().saturating_sub(1) / 2);
                for a in 0..p.len() {
                    for b in (a + 1)..p.len() {
                        let mut merged: Partition =
                            p.iter().enumerate().filter(|&(i, _)| i != b).map(|(_, &x)| x).collect();
                        merged[a] = p[a] | p[b];
                        let target = index[&canonical(merged)];
                        out.push((target, block_mass(p[a]) * block_mass(p[b])));
                    }
                }
                out
            })
            .collect();

        let singletons: Partition = (0..kappa).map(|i| 1u16 << i).collect();
        let initial = index[&singletons];
        Ok(Self {
            masses,
            states,
            transitions,
            initial,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Partition] {
        &self.states
    }

    pub fn initial_state(&self) -> usize {
        self.initial
    }

    pub fn transitions(&self, state: usize) -> &[(usize, f64)] {
        &self.transitions[state]
    }

    pub fn block_count(&self, state: usize) -> usize {
        self.states[state].len()
    }

    pub fn block_mass(&self, block: u16) -> f64 {
        (0..self.masses.len())
            .filter(|i| block & (1 << i) != 0)
            .map(|i| self.masses[i])
            .sum()
    }

    pub fn exit_rate(&self, state: usize) -> f64 {
        self.transitions[state].iter().map(|&(_, r)| r).sum()
    }

    /// Forward-equation right-hand side `dp/dt = p Q`.
    pub fn forward(&self, p: &[f64], dp: &mut [f64]) {
        dp.iter_mut().for_each(|d| *d = 0.0);
        for (from, outs) in self.transitions.iter().enumerate() {
            let mass = p[from];
            if mass == 0.0 {
                continue;
            }
            for &(to, rate) in outs {
                let flow = mass * rate;
                dp[to] += flow;
                dp[from] -= flow;
            }
        }
    }
}
