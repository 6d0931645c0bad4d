//! Compensated component-count martingale along a recorded trajectory.
//!
//! With `I(t) = int_0^t S2(s) ds`:
//! `M(t) = K(t) - kappa + t S1^2 / 2 - I(t) / 2`,
//! `<M>_t = t S1^2 / 2 - I(t) / 2` and `[M]_t = kappa - K(t)`.
//! `S2` is piecewise constant between merges, so `I` is an exact finite sum.

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::mass::MassVector;
use crate::sum::KahanSum;

#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePath {
    /// `0` followed by every merge time.
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub angle: Vec<f64>,
    pub bracket: Vec<u64>,
    /// Value of `S2` on `[times[i], times[i + 1])`.
    segment_s2: Vec<f64>,
    kappa: usize,
    sigma1_sq: f64,
    horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleValue {
    pub m: f64,
    pub angle: f64,
    pub bracket: u64,
}

pub fn martingale_path(traj: &Trajectory, mv: &MassVector) -> Result<MartingalePath> {
    let events = traj.events().ok_or(Error::InsufficientData)?;
    let summary = mv.summary();
    let sigma1_sq = summary.sigma1 * summary.sigma1;
    let kappa = summary.kappa;

    let n = events.len() + 1;
    let mut times = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut angle = Vec::with_capacity(n);
    let mut bracket = Vec::with_capacity(n);
    let mut segment_s2 = Vec::with_capacity(n);

    times.push(0.0);
    m.push(0.0);
    angle.push(0.0);
    bracket.push(0);
    segment_s2.push(summary.sigma2);

    // <M> accumulated as the integral of the total rate (S1^2 - S2) / 2,
    // which avoids cancelling t S1^2 / 2 against I / 2
    let mut compensator = KahanSum::new();
    let mut prev_t = 0.0;
    let mut prev_s2 = summary.sigma2;
    for e in events {
        compensator.add(0.5 * (sigma1_sq - prev_s2) * (e.time - prev_t));
        let a = compensator.value();
        times.push(e.time);
        angle.push(a);
        m.push(e.k_after as f64 - kappa as f64 + a);
        bracket.push((kappa - e.k_after) as u64);
        segment_s2.push(e.s2_after);
        prev_t = e.time;
        prev_s2 = e.s2_after;
    }

    Ok(MartingalePath {
        times,
        m,
        angle,
        bracket,
        segment_s2,
        kappa,
        sigma1_sq,
        horizon: traj.t_max,
    })
}

impl MartingalePath {
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// `K` at the `i`-th recorded time.
    pub fn k(&self, i: usize) -> usize {
        self.kappa - self.bracket[i] as usize
    }

    /// Evaluates `M`, `<M>` and `[M]` at an arbitrary `t` within the horizon.
    pub fn value_at(&self, t: f64) -> Result<MartingaleValue> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::HorizonTooShort {
                horizon: self.horizon,
                deficient: vec![t],
            });
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let angle = self.angle[i] + 0.5 * (self.sigma1_sq - self.segment_s2[i]) * (t - self.times[i]);
        let bracket = self.bracket[i];
        let m = angle - bracket as f64;
        Ok(MartingaleValue { m, angle, bracket })
    }

    /// Multiplies the recorded `S2` on segment `i` by `factor` and rebuilds
    /// `M` and `<M>` downstream. Only used to fault-inject the test harness.
    pub fn corrupt_segment(&mut self, i: usize, factor: f64) {
        self.segment_s2[i] *= factor;
        let mut comp = KahanSum::new();
        for j in 1..self.times.len() {
            comp.add(0.5 * (self.sigma1_sq - self.segment_s2[j - 1]) * (self.times[j] - self.times[j - 1]));
            self.angle[j] = comp.value();
            self.m[j] = self.angle[j] - self.bracket[j] as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, RecordMode};
    use crate::mass::{generalized_er, unit_masses};
    use crate::rng::StreamSeed;

    #[test]
    fn starts_at_zero() {
        let mv = unit_masses(20).unwrap();
        let tr = simulate(&mv, 0.01, StreamSeed::new(3, 0), &RecordMode::Full).unwrap();
        let p = martingale_path(&tr, &mv).unwrap();
        assert_eq!((p.m[0], p.angle[0], p.bracket[0]), (0.0, 0.0, 0));
        let v = p.value_at(0.0).unwrap();
        assert_eq!((v.m, v.angle, v.bracket), (0.0, 0.0, 0));
    }

    #[test]
    fn linear_before_first_merge() {
        let mv = generalized_er(30, &[2.0, 3.0]).unwrap();
        let s = mv.summary();
        let tr = simulate(&mv, 0.05, StreamSeed::new(4, 0), &RecordMode::Full).unwrap();
        let p = martingale_path(&tr, &mv).unwrap();
        let first = tr.events().unwrap()[0].time;
        for frac in [0.1, 0.5, 0.9] {
            let t = first * frac;
            let v = p.value_at(t).unwrap();
            let expected = t * (s.sigma1 * s.sigma1 - s.sigma2) / 2.0;
            assert!((v.angle - expected).abs() <= 1e-12 * expected);
            assert_eq!(v.bracket, 0);
        }
    }

    #[test]
    fn bracket_counts_merges() {
        let mv = unit_masses(40).unwrap();
        for r in 0..50 {
            let tr = simulate(&mv, 0.05, StreamSeed::new(6, r), &RecordMode::Full).unwrap();
            let p = martingale_path(&tr, &mv).unwrap();
            for (i, e) in tr.events().unwrap().iter().enumerate() {
                assert_eq!(p.bracket[i + 1], (i + 1) as u64);
                assert_eq!(p.bracket[i + 1], (40 - e.k_after) as u64);
                assert_eq!(p.k(i + 1), e.k_after);
            }
        }
    }

    #[test]
    fn matches_textbook_formula() {
        // M = K - kappa + t S1^2/2 - I/2 with I computed independently
        let mv = generalized_er(25, &[4.0]).unwrap();
        let s = mv.summary();
        let tr = simulate(&mv, 0.02, StreamSeed::new(8, 0), &RecordMode::Full).unwrap();
        let p = martingale_path(&tr, &mv).unwrap();
        let t = 0.017;
        let mut integral = 0.0;
        let mut prev = (0.0, s.sigma2);
        for e in tr.events().unwrap().iter().take_while(|e| e.time <= t) {
            integral += prev.1 * (e.time - prev.0);
            prev = (e.time, e.s2_after);
        }
        integral += prev.1 * (t - prev.0);
        let k = tr.k_at(t).unwrap() as f64;
        let m = k - s.kappa as f64 + t * s.sigma1 * s.sigma1 / 2.0 - integral / 2.0;
        let v = p.value_at(t).unwrap();
        assert!((v.m - m).abs() < 1e-9, "{} vs {}", v.m, m);
    }

    #[test]
    fn grid_mode_rejected() {
        let mv = unit_masses(5).unwrap();
        let tr = simulate(&mv, 0.1, StreamSeed::new(1, 0), &RecordMode::Grid(vec![0.1])).unwrap();
        assert_eq!(martingale_path(&tr, &mv), Err(Error::InsufficientData));
    }
}
