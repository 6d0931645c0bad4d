//! Event-driven simulation of the multiplicative coalescent.
//!
//! Each step draws an exponential waiting time at the total merge rate
//! `(S1^2 - S2) / 2`, then picks a pair with probability proportional to
//! `x_i * x_j` by two independent mass-proportional draws, rejecting
//! `i == j`. The merged mass overwrites the lower slot and the other slot
//! is zeroed, so slot identities stay stable.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mass::{MassSummary, MassVector};
use crate::rng::StreamSeed;
use crate::sampler::WeightedSampler;
use crate::sum::{compensated_sum, KahanSum};

#[derive(Debug, Clone)]
pub struct CoalescentState {
    sampler: WeightedSampler,
    s1: f64,
    s2: KahanSum,
    k: usize,
    clock: f64,
}

impl CoalescentState {
    pub fn new(mv: &MassVector) -> Self {
        let summary = mv.summary();
        let mut s2 = KahanSum::new();
        s2.add(summary.sigma2);
        Self {
            sampler: WeightedSampler::new(mv.masses()),
            s1: summary.sigma1,
            s2,
            k: summary.kappa,
            clock: 0.0,
        }
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> f64 {
        self.s2.value()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn sampler(&self) -> &WeightedSampler {
        &self.sampler
    }

    /// Current component masses, unordered.
    pub fn active_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.sampler.weights().iter().copied().filter(|&w| w > 0.0)
    }

    pub fn total_rate(&self) -> f64 {
        total_rate(self)
    }

    /// Merges the components in slots `i` and `j`.
    pub fn merge(&mut self, i: usize, j: usize) {
        debug_assert_ne!(i, j);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (a, b) = (self.sampler.weight(lo), self.sampler.weight(hi));
        self.sampler.set(lo, a + b);
        self.sampler.set(hi, 0.0);
        self.s2.add(2.0 * a * b);
        self.k -= 1;
    }
}

/// Total merge rate `sum_{i<j} x_i x_j = (S1^2 - S2) / 2`.
pub fn total_rate(state: &CoalescentState) -> f64 {
    if state.k < 2 {
        return 0.0;
    }
    0.5 * (state.s1 * state.s1 - state.s2.value())
}

/// Draws an unordered pair of distinct occupied slots with probability
/// proportional to the product of their masses.
pub fn propose_pair<R: Rng + ?Sized>(sampler: &WeightedSampler, rng: &mut R) -> Result<(usize, usize)> {
    let active = sampler.positive_slots();
    if active < 2 {
        return Err(Error::TooFewComponents(active));
    }
    loop {
        let i = sampler.sample(rng).ok_or(Error::TooFewComponents(0))?;
        let j = sampler.sample(rng).ok_or(Error::TooFewComponents(0))?;
        if i != j {
            return Ok((i.min(j), i.max(j)));
        }
    }
}

/// Per-attempt acceptance probability of [`propose_pair`]: `1 - S2 / S1^2`.
pub fn pair_acceptance(summary: &MassSummary) -> f64 {
    1.0 - summary.sigma2 / (summary.sigma1 * summary.sigma1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub time: f64,
    pub k_after: usize,
    pub s2_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub t: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordMode {
    Full,
    /// Record only `K` at these (sorted) times.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Record {
    Full(Vec<MergeEvent>),
    Grid(Vec<GridPoint>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: MassSummary,
    pub seed: StreamSeed,
    pub t_max: f64,
    /// Set when `t_max * sigma2 >= 1`, where the second-moment bound no
    /// longer applies.
    pub beyond_moment_window: bool,
    pub record: Record,
}

impl Trajectory {
    pub fn events(&self) -> Option<&[MergeEvent]> {
        match &self.record {
            Record::Full(ev) => Some(ev),
            Record::Grid(_) => None,
        }
    }

    /// `K(t)`, right-continuous. Grid-mode trajectories only answer at
    /// their recorded times.
    pub fn k_at(&self, t: f64) -> Result<usize> {
        if t > self.t_max {
            return Err(Error::HorizonTooShort {
                horizon: self.t_max,
                deficient: vec![t],
            });
        }
        match &self.record {
            Record::Full(events) => {
                let idx = events.partition_point(|e| e.time <= t);
                Ok(if idx == 0 {
                    self.initial.kappa
                } else {
                    events[idx - 1].k_after
                })
            }
            Record::Grid(points) => points
                .iter()
                .find(|p| p.t == t || (p.t - t).abs() <= 1e-12 * t.abs())
                .map(|p| p.k)
                .ok_or(Error::NotRecorded(t)),
        }
    }

    /// `S2(t)` = sum of squared component masses, right-continuous.
    pub fn s2_at(&self, t: f64) -> Result<f64> {
        if t > self.t_max {
            return Err(Error::HorizonTooShort {
                horizon: self.t_max,
                deficient: vec![t],
            });
        }
        let events = self.events().ok_or(Error::InsufficientData)?;
        let idx = events.partition_point(|e| e.time <= t);
        Ok(if idx == 0 {
            self.initial.sigma2
        } else {
            events[idx - 1].s2_after
        })
    }

    pub fn event_count(&self) -> Option<usize> {
        self.events().map(<[MergeEvent]>::len)
    }
}

fn validate_grid(grid: &[f64], t_max: f64) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidGrid("grid times must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidGrid("grid times must be sorted".into()));
    }
    let deficient: Vec<f64> = grid.iter().copied().filter(|&t| t > t_max).collect();
    if !deficient.is_empty() {
        return Err(Error::HorizonTooShort {
            horizon: t_max,
            deficient,
        });
    }
    Ok(())
}

/// Runs one trajectory from `mv` up to `t_max`.
pub fn simulate(mv: &MassVector, t_max: f64, seed: StreamSeed, mode: &RecordMode) -> Result<Trajectory> {
    if !(t_max >= 0.0) {
        return Err(Error::NegativeHorizon(t_max));
    }
    let grid: &[f64] = match mode {
        RecordMode::Full => &[],
        RecordMode::Grid(g) => {
            validate_grid(g, t_max)?;
            g
        }
    };

    let initial = mv.summary();
    let mut state = CoalescentState::new(mv);
    let mut rng = seed.rng();
    let mut events = Vec::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut next_grid = 0;

    while state.k > 1 {
        let rate = state.total_rate();
        // cancellation in S1^2 - S2 can only bite for wildly unequal masses
        if !(rate > 0.0) {
            break;
        }
        let u: f64 = rng.random();
        let t_next = state.clock + -(-u).ln_1p() / rate;
        if t_next > t_max {
            break;
        }
        while next_grid < grid.len() && grid[next_grid] < t_next {
            points.push(GridPoint {
                t: grid[next_grid],
                k: state.k,
            });
            next_grid += 1;
        }
        let (i, j) = propose_pair(&state.sampler, &mut rng)?;
        state.clock = t_next;
        state.merge(i, j);
        if matches!(mode, RecordMode::Full) {
            events.push(MergeEvent {
                time: t_next,
                k_after: state.k,
                s2_after: state.s2(),
            });
        }
    }
    points.extend(grid[next_grid..].iter().map(|&t| GridPoint { t, k: state.k }));

    Ok(Trajectory {
        initial,
        seed,
        t_max,
        beyond_moment_window: t_max * initial.sigma2 >= 1.0,
        record: match mode {
            RecordMode::Full => Record::Full(events),
            RecordMode::Grid(_) => Record::Grid(points),
        },
    })
}

/// Settings shared by every trajectory of an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec<'a> {
    pub masses: &'a MassVector,
    pub t_max: f64,
    pub master_seed: u64,
    pub reps: usize,
    pub mode: RecordMode,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
}

/// Simulates `reps` trajectories (stream `r` for trajectory `r`) and maps
/// each through `f`. Output order is trajectory order regardless of worker
/// count.
pub fn run_ensemble_with<T, F>(spec: &EnsembleSpec<'_>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Trajectory) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::WorkerPool(e.to_string()))?;
    pool.install(|| {
        (0..spec.reps)
            .into_par_iter()
            .map(|r| {
                simulate(
                    spec.masses,
                    spec.t_max,
                    StreamSeed::new(spec.master_seed, r as u64),
                    &spec.mode,
                )
                .map(&f)
            })
            .collect()
    })
}

pub fn run_ensemble(spec: &EnsembleSpec<'_>) -> Result<Vec<Trajectory>> {
    run_ensemble_with(spec, |t| t)
}

/// Mass conservation check used by tests: active masses sum to `S1`.
pub fn mass_defect(state: &CoalescentState) -> f64 {
    (compensated_sum(state.active_masses()) - state.s1).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::{generalized_er, unit_masses};
    use crate::stats::chi_square_gof;
    use proptest::prelude::*;

    #[test]
    fn total_rate_examples() {
        assert_eq!(CoalescentState::new(&unit_masses(10).unwrap()).total_rate(), 45.0);
        let mv = MassVector::new(vec![2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(CoalescentState::new(&mv).total_rate(), 5.0);
        assert_eq!(CoalescentState::new(&unit_masses(1).unwrap()).total_rate(), 0.0);
    }

    #[test]
    fn acceptance_probability() {
        let mv = MassVector::new(vec![2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(pair_acceptance(&mv.summary()), 0.625);
    }

    #[test]
    fn propose_pair_errors_and_two_components() {
        let mut rng = StreamSeed::new(0, 0).rng();
        let one = WeightedSampler::new(&[3.0, 0.0]);
        assert_eq!(propose_pair(&one, &mut rng), Err(Error::TooFewComponents(1)));
        let two = WeightedSampler::new(&[0.0, 3.0, 0.0, 0.5]);
        for _ in 0..100 {
            assert_eq!(propose_pair(&two, &mut rng).unwrap(), (1, 3));
        }
    }

    #[test]
    fn pair_marginals_three_masses() {
        let s = WeightedSampler::new(&[2.0, 1.0, 1.0]);
        let mut rng = StreamSeed::new(11, 0).rng();
        let mut counts = [0u64; 3];
        let draws = 300_000;
        for _ in 0..draws {
            match propose_pair(&s, &mut rng).unwrap() {
                (0, 1) => counts[0] += 1,
                (0, 2) => counts[1] += 1,
                (1, 2) => counts[2] += 1,
                p => panic!("unexpected pair {p:?}"),
            }
        }
        let p = chi_square_gof(&counts, &[0.4, 0.4, 0.2]).p_value;
        assert!(p > 0.01, "p = {p}, counts = {counts:?}");
    }

    #[test]
    fn pair_law_frozen_four_components() {
        let masses = [3.0, 2.0, 1.5, 0.5];
        let s = WeightedSampler::new(&masses);
        let mut probs = Vec::new();
        let mut index = std::collections::HashMap::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                index.insert((i, j), probs.len());
                probs.push(masses[i] * masses[j]);
            }
        }
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut counts = vec![0u64; probs.len()];
        let mut rng = StreamSeed::new(12, 0).rng();
        for _ in 0..1_000_000 {
            counts[index[&propose_pair(&s, &mut rng).unwrap()]] += 1;
        }
        let p = chi_square_gof(&counts, &probs).p_value;
        assert!(p > 0.01, "p = {p}, counts = {counts:?}");
    }

    #[test]
    fn zero_horizon_and_single_component() {
        let mv = unit_masses(5).unwrap();
        let tr = simulate(&mv, 0.0, StreamSeed::new(1, 0), &RecordMode::Full).unwrap();
        assert_eq!(tr.events().unwrap().len(), 0);
        assert_eq!(tr.k_at(0.0).unwrap(), 5);

        let one = unit_masses(1).unwrap();
        let tr = simulate(&one, 1e6, StreamSeed::new(1, 0), &RecordMode::Full).unwrap();
        assert!(tr.events().unwrap().is_empty());
        assert_eq!(tr.k_at(1e6).unwrap(), 1);
    }

    #[test]
    fn negative_horizon_rejected() {
        let mv = unit_masses(3).unwrap();
        assert_eq!(
            simulate(&mv, -1.0, StreamSeed::new(1, 0), &RecordMode::Full),
            Err(Error::NegativeHorizon(-1.0))
        );
        assert!(matches!(
            simulate(&mv, 1.0, StreamSeed::new(1, 0), &RecordMode::Grid(vec![0.5, 2.0])),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn grid_mode_matches_full_mode() {
        let mv = generalized_er(200, &[3.0, 2.0]).unwrap();
        let t_max = 0.9 / 200.0;
        let grid: Vec<f64> = (0..=9).map(|i| t_max * i as f64 / 9.0).collect();
        for r in 0..20 {
            let seed = StreamSeed::new(5, r);
            let full = simulate(&mv, t_max, seed, &RecordMode::Full).unwrap();
            let gridded = simulate(&mv, t_max, seed, &RecordMode::Grid(grid.clone())).unwrap();
            for &t in &grid {
                assert_eq!(full.k_at(t).unwrap(), gridded.k_at(t).unwrap());
            }
        }
    }

    #[test]
    fn three_unit_masses_mean() {
        let mv = unit_masses(3).unwrap();
        let reps = 100_000;
        let spec = EnsembleSpec {
            masses: &mv,
            t_max: 0.2,
            master_seed: 2024,
            reps,
            mode: RecordMode::Grid(vec![0.2]),
            workers: 0,
        };
        let ks = run_ensemble_with(&spec, |t| t.k_at(0.2).unwrap() as f64).unwrap();
        let mean = ks.iter().sum::<f64>() / reps as f64;
        let var = ks.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let expected = 1.0 + 3.0 * (-0.4f64).exp() - (-0.6f64).exp();
        assert!((expected - 2.46215).abs() < 1e-5);
        assert!(
            (mean - expected).abs() <= 3.0 * (var / reps as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn ensemble_independent_of_workers() {
        let mv = unit_masses(100).unwrap();
        let spec = |workers| EnsembleSpec {
            masses: &mv,
            t_max: 0.008,
            master_seed: 9,
            reps: 64,
            mode: RecordMode::Full,
            workers,
        };
        let a = run_ensemble(&spec(1)).unwrap();
        let b = run_ensemble(&spec(4)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn trajectory_invariants(
            n in 2usize..60,
            thetas in proptest::collection::vec(0.1f64..5.0, 0..6),
            horizon in 0.0f64..2.0,
            seed in 0u64..1000,
        ) {
            let mv = generalized_er(n, &thetas).unwrap();
            let s = mv.summary();
            let t_max = horizon / s.sigma2;
            let tr = simulate(&mv, t_max, StreamSeed::new(seed, 0), &RecordMode::Full).unwrap();
            let ev = tr.events().unwrap();
            prop_assert!(ev.len() < s.kappa);
            prop_assert_eq!(tr.beyond_moment_window, horizon >= 1.0);
            let mut prev_t = 0.0;
            let mut prev_k = s.kappa;
            let mut prev_s2 = s.sigma2;
            for e in ev {
                prop_assert!(e.time > prev_t && e.time <= t_max);
                prop_assert_eq!(e.k_after, prev_k - 1);
                prop_assert!(e.s2_after > prev_s2);
                prop_assert!(e.s2_after <= s.sigma1 * s.sigma1 * (1.0 + 1e-12));
                prev_t = e.time;
                prev_k = e.k_after;
                prev_s2 = e.s2_after;
            }
            if prev_k == 1 {
                prop_assert!((prev_s2 - s.sigma1 * s.sigma1).abs() <= 1e-9 * s.sigma1 * s.sigma1);
            }
        }

        #[test]
        fn mass_is_conserved(n in 2usize..80, seed in 0u64..1000) {
            let mv = generalized_er(n, &[2.5, 0.7]).unwrap();
            let mut state = CoalescentState::new(&mv);
            let mut rng = StreamSeed::new(seed, 0).rng();
            while state.k() > 1 {
                let (i, j) = propose_pair(state.sampler(), &mut rng).unwrap();
                state.merge(i, j);
                prop_assert!(mass_defect(&state) <= 1e-9 * state.s1());
                let direct: f64 = state.active_masses().map(|x| x * x).sum();
                prop_assert!((direct - state.s2()).abs() <= 1e-9 * state.s2());
                prop_assert!(state.s1() * state.s1() >= state.s2() * (1.0 - 1e-12));
            }
        }
    }
}
