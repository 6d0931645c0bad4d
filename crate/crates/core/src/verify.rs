//! The fixed battery of end-to-end checks behind the `verify` command and the
//! acceptance test target.

use std::fmt;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::analysis::{
    self, covariance_structure, ensemble_stats, increment_independence, martingale_suite, scale_trajectory,
    second_moment_bound_check, test_drift_slope, test_fluid, variance_ratio, EnsembleSummary, FluidTolerance,
    GaussianHypothesis, OriginalTime, ScaledTrajectory,
};
use crate::engine::{run_ensemble, run_ensemble_with, EnsembleSpec, RecordMode, Trajectory};
use crate::error::Result;
use crate::io::write_trajectory;
use crate::martingale::{martingale_path, MartingalePath};
use crate::mass::{generalized_er, limit_params_er, limit_params_ger, limit_params_nr, quantile_masses, unit_masses};
use crate::mass::{MassVector, QuantileSpec};
use crate::oracle::{exact_k_distribution, percolation_k_samples};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Stated ensemble sizes and tolerances.
    Full,
    /// A tenth of the repetitions with doubled tolerances and halved
    /// significance levels.
    Quick,
}

impl Profile {
    pub fn reps(self, full: usize) -> usize {
        match self {
            Profile::Full => full,
            Profile::Quick => (full / 10).max(2),
        }
    }

    pub fn tol(self, full: f64) -> f64 {
        match self {
            Profile::Full => full,
            Profile::Quick => 2.0 * full,
        }
    }

    pub fn level(self, full: f64) -> f64 {
        match self {
            Profile::Full => full,
            Profile::Quick => full / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub profile: Profile,
    pub master_seed: u64,
    /// Worker threads; 0 means available parallelism.
    pub workers: usize,
}

impl VerifyConfig {
    pub fn new(profile: Profile, master_seed: u64, workers: usize) -> Self {
        Self {
            profile,
            master_seed,
            workers,
        }
    }

    fn seed(&self, id: u64) -> u64 {
        self.master_seed.wrapping_mul(1_000_003).wrapping_add(id)
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self::new(Profile::Full, 20_240_601, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] #{:<2} {}: {}", self.id, self.name, self.detail)
    }
}

fn outcome(id: u8, name: &'static str, passed: bool, detail: String) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
    }
}

fn scaled_ensemble<M: analysis::LimitModel + Sync>(
    mv: &MassVector,
    model: &M,
    grid: &[f64],
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<ScaledTrajectory>> {
    let process_grid: Vec<f64> = grid.iter().map(|&t| model.process_time(t)).collect();
    let spec = EnsembleSpec {
        masses: mv,
        t_max: process_grid.last().copied().unwrap_or(0.0),
        master_seed: seed,
        reps,
        mode: RecordMode::Grid(process_grid),
        workers,
    };
    run_ensemble_with(&spec, |tr| scale_trajectory(&tr, model, grid))?
        .into_iter()
        .collect()
}

/// Erdős–Rényi fluid limit at `n = 2e4` on ten grid points in `(0, 0.9]`.
pub fn criterion_1(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let n = 20_000;
    let params = limit_params_er(n);
    let grid: Vec<f64> = (1..=10).map(|i| 0.09 * i as f64).collect();
    let paths = scaled_ensemble(
        &unit_masses(n)?,
        &params,
        &grid,
        cfg.profile.reps(500),
        cfg.seed(1),
        cfg.workers,
    )?;
    let summary = ensemble_stats(&paths)?;
    let report = test_fluid(&summary, &params, FluidTolerance::new(cfg.profile.tol(0.005)));
    Ok(outcome(1, "er_fluid_limit", report.passed(), report.detail))
}

/// Shared ensemble for the Erdős–Rényi fluctuation criteria.
#[derive(Debug, Clone)]
pub struct ErFluctuations {
    pub paths: Vec<ScaledTrajectory>,
    pub summary: EnsembleSummary,
    pub hypothesis: GaussianHypothesis,
}

pub const ER_FLUCTUATION_GRID: [f64; 5] = [0.3, 0.4, 0.6, 0.8, 0.9];

pub fn er_fluctuations(cfg: &VerifyConfig) -> Result<ErFluctuations> {
    let n = 10_000;
    let params = limit_params_er(n);
    let paths = scaled_ensemble(
        &unit_masses(n)?,
        &params,
        &ER_FLUCTUATION_GRID,
        cfg.profile.reps(2000),
        cfg.seed(2),
        cfg.workers,
    )?;
    let summary = ensemble_stats(&paths)?;
    Ok(ErFluctuations {
        paths,
        summary,
        hypothesis: GaussianHypothesis::from_params(&params),
    })
}

fn restrict(summary: &EnsembleSummary, times: &[f64]) -> EnsembleSummary {
    let idx: Vec<usize> = times.iter().filter_map(|&t| summary.index_of(t)).collect();
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
    EnsembleSummary {
        grid: pick(&summary.grid),
        rep_count: summary.rep_count,
        mean_scaled_k: pick(&summary.mean_scaled_k),
        se_scaled_k: pick(&summary.se_scaled_k),
        mean_z: pick(&summary.mean_z),
        var_z: pick(&summary.var_z),
        se_mean_z: pick(&summary.se_mean_z),
        se_var_z: pick(&summary.se_var_z),
        cov_z: idx.iter().map(|&i| pick(&summary.cov_z[i])).collect(),
    }
}

/// `|Var Z(t) / (t/2) - 1| <= 0.15` at `t = 0.3, 0.6, 0.9`.
pub fn criterion_2(data: &ErFluctuations, cfg: &VerifyConfig) -> CriterionOutcome {
    let sub = restrict(&data.summary, &[0.3, 0.6, 0.9]);
    let report = variance_ratio(&sub, &data.hypothesis, cfg.profile.tol(0.15));
    outcome(2, "er_fluctuation_variance", report.passed(), report.detail)
}

/// KS test of `Z(0.8)` against `N(0, 0.4)` at level 0.01.
pub fn criterion_3(data: &ErFluctuations, cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let i = data.summary.index_of(0.8).expect("0.8 is on the fluctuation grid");
    let zs = analysis::column(&data.paths, i);
    let normal = Normal::new(0.0, data.hypothesis.variance(0.8).sqrt())
        .map_err(|e| crate::Error::InvalidParams(e.to_string()))?;
    let ks = stats::ks_one_sample(&zs, |x| normal.cdf(x));
    let level = cfg.profile.level(0.01);
    Ok(outcome(
        3,
        "er_static_gaussianity",
        ks.p_value > level,
        format!("D = {:.4}, p = {:.4} (level {level})", ks.statistic, ks.p_value),
    ))
}

/// Covariance of `Z(0.4), Z(0.8)` within 0.04 of 0.2 and increment
/// correlation within 0.1.
pub fn criterion_4(data: &ErFluctuations, cfg: &VerifyConfig) -> CriterionOutcome {
    let sub = restrict(&data.summary, &[0.4, 0.8]);
    let cov = covariance_structure(
        &sub,
        &data.hypothesis,
        cfg.profile.tol(0.04) / data.hypothesis.variance(0.4),
    );
    let paths: Vec<ScaledTrajectory> = data
        .paths
        .iter()
        .map(|p| {
            let pick = |v: &[f64]| {
                [0.4, 0.8]
                    .iter()
                    .map(|&t| v[data.summary.index_of(t).unwrap()])
                    .collect::<Vec<_>>()
            };
            ScaledTrajectory {
                scaled_k: pick(&p.scaled_k),
                fluct: analysis::FluctuationPath {
                    grid: vec![0.4, 0.8],
                    z: pick(&p.fluct.z),
                },
            }
        })
        .collect();
    let inc = increment_independence(&paths, cfg.profile.tol(0.1));
    outcome(
        4,
        "brownian_covariance",
        cov.passed() && inc.passed(),
        format!(
            "cov {:.4} (target 0.2); increment corr {:.4}",
            sub.cov_z[0][1], inc.statistic
        ),
    )
}

/// Engine, percolation sampler and exact law agree in total variation for
/// five unit masses at `t = 0.3`.
pub fn criterion_5(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let mv = unit_masses(5)?;
    let t = 0.3;
    let reps = cfg.profile.reps(100_000);
    let spec = EnsembleSpec {
        masses: &mv,
        t_max: t,
        master_seed: cfg.seed(5),
        reps,
        mode: RecordMode::Grid(vec![t]),
        workers: cfg.workers,
    };
    let engine_k: Vec<usize> = run_ensemble_with(&spec, |tr| tr.k_at(t))?
        .into_iter()
        .collect::<Result<_>>()?;
    let perc_k = percolation_k_samples(&mv, t, cfg.seed(5) ^ 0x5eed, reps, cfg.workers)?;
    let exact = exact_k_distribution(&mv, t)?.by_k();
    let engine = stats::empirical_pmf(&engine_k, 5);
    let perc = stats::empirical_pmf(&perc_k, 5);
    let tol = cfg.profile.tol(0.01);
    let d = [
        stats::total_variation(&engine, &perc),
        stats::total_variation(&engine, &exact),
        stats::total_variation(&perc, &exact),
    ];
    Ok(outcome(
        5,
        "oracle_triangle",
        d.iter().all(|&x| x <= tol),
        format!(
            "TV engine/perc {:.4}, engine/exact {:.4}, perc/exact {:.4} (tol {tol})",
            d[0], d[1], d[2]
        ),
    ))
}

/// Shared full-record ensemble of fifty unit masses.
#[derive(Debug, Clone)]
pub struct UnitFifty {
    pub masses: MassVector,
    pub trajectories: Vec<Trajectory>,
    pub martingales: Vec<MartingalePath>,
}

pub const MARTINGALE_GRID: [f64; 5] = [0.0, 0.001, 0.002, 0.003, 0.004];

/// `{0, 0.2, 0.4, 0.6, 0.8} / sigma2` for fifty unit masses.
pub fn second_moment_grid() -> Vec<f64> {
    [0.0, 0.2, 0.4, 0.6, 0.8].iter().map(|c| c / 50.0).collect()
}

pub fn unit_fifty(cfg: &VerifyConfig) -> Result<UnitFifty> {
    let masses = unit_masses(50)?;
    let spec = EnsembleSpec {
        masses: &masses,
        // long enough for both the martingale grid and the moment grid
        t_max: 0.8 / 50.0,
        master_seed: cfg.seed(6),
        reps: cfg.profile.reps(10_000),
        mode: RecordMode::Full,
        workers: cfg.workers,
    };
    let trajectories = run_ensemble(&spec)?;
    let martingales = trajectories
        .iter()
        .map(|t| martingale_path(t, &masses))
        .collect::<Result<_>>()?;
    Ok(UnitFifty {
        masses,
        trajectories,
        martingales,
    })
}

pub fn criterion_6(data: &UnitFifty, cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let suite = martingale_suite(&data.martingales, &MARTINGALE_GRID, cfg.profile.tol(3.0))?;
    let detail = suite
        .parts()
        .iter()
        .map(|r| format!("{} {:.3}", r.name, r.statistic))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(outcome(6, "martingale_suite", suite.passed(), detail))
}

pub fn criterion_7(data: &UnitFifty, cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let report = second_moment_bound_check(
        &data.trajectories,
        &data.masses,
        &second_moment_grid(),
        cfg.profile.tol(3.0),
    )?;
    Ok(outcome(7, "second_moment_bound", report.passed(), report.detail))
}

/// Norros–Reittu fluid limit in original time for Pareto(3) weights.
pub fn criterion_8(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let n = 10_000;
    let spec = QuantileSpec::pareto(3.0)?;
    let mv = quantile_masses(n, &spec)?;
    let model = OriginalTime(limit_params_nr(n, &spec)?);
    let grid: Vec<f64> = (1..=10).map(|i| 0.04 * i as f64).collect();
    let paths = scaled_ensemble(&mv, &model, &grid, cfg.profile.reps(500), cfg.seed(8), cfg.workers)?;
    let summary = ensemble_stats(&paths)?;
    let tol = FluidTolerance {
        abs_tol: cfg.profile.tol(0.01),
        se_band: None,
    };
    let report = test_fluid(&summary, &model, tol);
    Ok(outcome(8, "nr_fluid_limit", report.passed(), report.detail))
}

/// Generalized Erdős–Rényi drift: slope of the mean fluctuation must be
/// near -2 and clearly away from -4.
pub fn criterion_9(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let n = 10_000;
    let thetas = vec![2.0; 100];
    let params = limit_params_ger(n, &thetas)?;
    let grid: Vec<f64> = (2..=8).map(|i| 0.1 * i as f64).collect();
    let paths = scaled_ensemble(
        &generalized_er(n, &thetas)?,
        &params,
        &grid,
        cfg.profile.reps(2000),
        cfg.seed(9),
        cfg.workers,
    )?;
    let summary = ensemble_stats(&paths)?;
    let tol = cfg.profile.tol(0.3);
    let right = test_drift_slope(&summary, -params.beta2 / 2.0, tol);
    let wrong = test_drift_slope(&summary, -params.beta2, tol);
    Ok(outcome(
        9,
        "ger_drift_discrimination",
        right.passed() && !wrong.passed(),
        format!(
            "{}; alternative slope {} rejected: {}",
            right.detail,
            -params.beta2,
            !wrong.passed()
        ),
    ))
}

pub fn criterion_10() -> Result<CriterionOutcome> {
    let table = analysis::riemann_convergence(|x: f64| x.powf(-1.0 / 3.0), 1.5, &[100, 1_000, 10_000, 100_000])?;
    let report = table.report();
    Ok(outcome(
        10,
        "riemann_convergence",
        report.passed(),
        format!(
            "{}; decreasing {}, final ratio {:.4} (need < 1/3)",
            report.detail, table.strictly_decreasing, report.statistic
        ),
    ))
}

fn k_counts(mv: &MassVector, t: f64, reps: usize, seed: u64, workers: usize) -> Result<Vec<u64>> {
    let spec = EnsembleSpec {
        masses: mv,
        t_max: t,
        master_seed: seed,
        reps,
        mode: RecordMode::Grid(vec![t]),
        workers,
    };
    let ks: Vec<usize> = run_ensemble_with(&spec, |tr| tr.k_at(t))?
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(stats::counts(&ks, mv.kappa()))
}

/// Doubling every mass is the same as running four times as long.
pub fn criterion_11(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let t = 0.05;
    let reps = cfg.profile.reps(100_000);
    let heavy = k_counts(&MassVector::new(vec![2.0; 3], 3)?, t, reps, cfg.seed(11), cfg.workers)?;
    let light = k_counts(&unit_masses(3)?, 4.0 * t, reps, cfg.seed(11) ^ 0xfeed, cfg.workers)?;
    let chi = stats::chi_square_two_sample(&heavy, &light);
    let level = cfg.profile.level(0.01);
    Ok(outcome(
        11,
        "time_change_identity",
        chi.p_value > level,
        format!("chi2 = {:.3} on {} df, p = {:.4}", chi.statistic, chi.df, chi.p_value),
    ))
}

/// Serialized trajectories of one ensemble, concatenated in trajectory order.
pub fn ensemble_bytes(
    mv: &MassVector,
    t_max: f64,
    seed: u64,
    reps: usize,
    mode: &RecordMode,
    workers: usize,
) -> Result<Vec<u8>> {
    let spec = EnsembleSpec {
        masses: mv,
        t_max,
        master_seed: seed,
        reps,
        mode: mode.clone(),
        workers,
    };
    let trajs = run_ensemble(&spec)?;
    let mut out = Vec::new();
    for tr in &trajs {
        write_trajectory(&mut out, tr).expect("writing to memory");
    }
    Ok(out)
}

/// Byte-identical trajectory files across 1, 4 and 8 workers.
pub fn criterion_12(cfg: &VerifyConfig) -> Result<CriterionOutcome> {
    let reps = cfg.profile.reps(200);
    let cases: Vec<(MassVector, f64, RecordMode)> = vec![
        (unit_masses(2000)?, 0.9 / 2000.0, RecordMode::Full),
        (
            generalized_er(2000, &[2.0; 40])?,
            0.8 / 2000.0,
            RecordMode::Grid(vec![0.1 / 2000.0, 0.5 / 2000.0, 0.8 / 2000.0]),
        ),
        (
            quantile_masses(2000, &QuantileSpec::pareto(3.0)?)?,
            0.4,
            RecordMode::Full,
        ),
    ];
    let mut mismatches = Vec::new();
    for (c, (mv, t_max, mode)) in cases.iter().enumerate() {
        let reference = ensemble_bytes(mv, *t_max, cfg.seed(12), reps, mode, 1)?;
        for workers in [4, 8] {
            if ensemble_bytes(mv, *t_max, cfg.seed(12), reps, mode, workers)? != reference {
                mismatches.push(format!("case {c} at {workers} workers"));
            }
        }
    }
    Ok(outcome(
        12,
        "determinism",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("{} ensembles identical at 1, 4 and 8 workers", cases.len())
        } else {
            format!("differs: {}", mismatches.join(", "))
        },
    ))
}

/// Runs all twelve criteria in order.
pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<CriterionOutcome>> {
    let mut out = vec![criterion_1(cfg)?];
    let er = er_fluctuations(cfg)?;
    out.push(criterion_2(&er, cfg));
    out.push(criterion_3(&er, cfg)?);
    out.push(criterion_4(&er, cfg));
    drop(er);
    out.push(criterion_5(cfg)?);
    let fifty = unit_fifty(cfg)?;
    out.push(criterion_6(&fifty, cfg)?);
    out.push(criterion_7(&fifty, cfg)?);
    drop(fifty);
    out.push(criterion_8(cfg)?);
    out.push(criterion_9(cfg)?);
    out.push(criterion_10()?);
    out.push(criterion_11(cfg)?);
    out.push(criterion_12(cfg)?);
    Ok(out)
}
