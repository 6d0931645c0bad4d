//! Limit formulas, scaled and fluctuation processes built from ensembles, and
//! the statistical checks run against them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::martingale::MartingalePath;
use crate::mass::{LimitParams, MassVector, QuantileSpec};
use crate::stats;
use crate::sum::compensated_sum;

/// `1 - t alpha / 2`.
pub fn fluid_limit(t: f64, params: &LimitParams) -> f64 {
    1.0 - t * params.alpha / 2.0
}

/// `beta1 - beta2 t / 2`.
pub fn fluct_drift(t: f64, params: &LimitParams) -> f64 {
    params.beta1 - params.beta2 * t / 2.0
}

/// `alpha t / 2`, the variance of the Brownian part at time `t`.
pub fn fluct_variance(t: f64, params: &LimitParams) -> f64 {
    params.alpha * t / 2.0
}

/// How a time grid maps to process time and what the limit predicts there.
pub trait LimitModel {
    fn varkappa(&self) -> f64;
    fn process_time(&self, t: f64) -> f64;
    fn fluid(&self, t: f64) -> f64;
    fn drift(&self, t: f64) -> f64;
    fn variance(&self, t: f64) -> f64;
}

impl LimitModel for LimitParams {
    fn varkappa(&self) -> f64 {
        self.varkappa
    }
    fn process_time(&self, t: f64) -> f64 {
        LimitParams::process_time(self, t)
    }
    fn fluid(&self, t: f64) -> f64 {
        fluid_limit(t, self)
    }
    fn drift(&self, t: f64) -> f64 {
        fluct_drift(t, self)
    }
    fn variance(&self, t: f64) -> f64 {
        fluct_variance(t, self)
    }
}

/// The same limit expressed in unscaled process time `s = t / varsigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OriginalTime(pub LimitParams);

impl LimitModel for OriginalTime {
    fn varkappa(&self) -> f64 {
        self.0.varkappa
    }
    fn process_time(&self, s: f64) -> f64 {
        s
    }
    fn fluid(&self, s: f64) -> f64 {
        1.0 - s * self.0.varsigma * self.0.alpha / 2.0
    }
    fn drift(&self, s: f64) -> f64 {
        fluct_drift(s * self.0.varsigma, &self.0)
    }
    fn variance(&self, s: f64) -> f64 {
        fluct_variance(s * self.0.varsigma, &self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationPath {
    pub grid: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTrajectory {
    /// `K(process_time(t)) / varkappa` on the grid.
    pub scaled_k: Vec<f64>,
    pub fluct: FluctuationPath,
}

/// Evaluates `K` at the process times of `grid` and returns the normalized
/// path and its fluctuation `sqrt(varkappa) (K / varkappa - fluid)`.
pub fn scale_trajectory<M: LimitModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
    grid: &[f64],
) -> Result<ScaledTrajectory> {
    let deficient: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&t| model.process_time(t) > traj.t_max)
        .collect();
    if !deficient.is_empty() {
        return Err(Error::HorizonTooShort {
            horizon: traj.t_max,
            deficient,
        });
    }
    let vk = model.varkappa();
    let root = vk.sqrt();
    let mut scaled_k = Vec::with_capacity(grid.len());
    let mut z = Vec::with_capacity(grid.len());
    for &t in grid {
        let k = traj.k_at(model.process_time(t))? as f64;
        let scaled = k / vk;
        scaled_k.push(scaled);
        z.push(root * (scaled - model.fluid(t)));
    }
    Ok(ScaledTrajectory {
        scaled_k,
        fluct: FluctuationPath { grid: grid.to_vec(), z },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub grid: Vec<f64>,
    pub rep_count: usize,
    pub mean_scaled_k: Vec<f64>,
    pub se_scaled_k: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub var_z: Vec<f64>,
    pub se_mean_z: Vec<f64>,
    pub se_var_z: Vec<f64>,
    /// `cov_z[i][j] = Cov(Z(grid[i]), Z(grid[j]))`.
    pub cov_z: Vec<Vec<f64>>,
}

impl EnsembleSummary {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Values of grid point `i` across all paths.
pub fn column(paths: &[ScaledTrajectory], i: usize) -> Vec<f64> {
    paths.iter().map(|p| p.fluct.z[i]).collect()
}

fn scaled_column(paths: &[ScaledTrajectory], i: usize) -> Vec<f64> {
    paths.iter().map(|p| p.scaled_k[i]).collect()
}

pub fn ensemble_stats(paths: &[ScaledTrajectory]) -> Result<EnsembleSummary> {
    if paths.len() < 2 {
        return Err(Error::TooFewPaths {
            needed: 2,
            got: paths.len(),
        });
    }
    let grid = paths[0].fluct.grid.clone();
    if paths
        .iter()
        .any(|p| p.fluct.grid != grid || p.scaled_k.len() != grid.len())
    {
        return Err(Error::MismatchedGrids);
    }
    let r = paths.len() as f64;
    let cols: Vec<Vec<f64>> = (0..grid.len()).map(|i| column(paths, i)).collect();
    let scaled: Vec<Vec<f64>> = (0..grid.len()).map(|i| scaled_column(paths, i)).collect();
    let var_z: Vec<f64> = cols.iter().map(|c| stats::variance(c)).collect();
    Ok(EnsembleSummary {
        rep_count: paths.len(),
        mean_scaled_k: scaled.iter().map(|c| stats::mean(c)).collect(),
        se_scaled_k: scaled.iter().map(|c| (stats::variance(c) / r).sqrt()).collect(),
        mean_z: cols.iter().map(|c| stats::mean(c)).collect(),
        se_mean_z: var_z.iter().map(|v| (v / r).sqrt()).collect(),
        se_var_z: cols.iter().map(|c| stats::variance_se(c)).collect(),
        cov_z: cols
            .iter()
            .map(|a| cols.iter().map(|b| stats::covariance(a, b)).collect())
            .collect(),
        var_z,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub detail: String,
}

impl TestReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    fn new(name: &str, statistic: f64, p_value: Option<f64>, tolerance: f64, ok: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            p_value,
            tolerance,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }
}

/// Acceptance band for the fluid limit: a sup-norm bound and optionally a
/// pointwise bound in standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidTolerance {
    pub abs_tol: f64,
    pub se_band: Option<f64>,
}

impl FluidTolerance {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            se_band: Some(3.0),
        }
    }
}

/// Sup over the grid of `|mean K/varkappa - fluid(t)|` against `abs_tol`,
/// plus each deviation within `se_band` standard errors when set.
pub fn test_fluid<M: LimitModel + ?Sized>(summary: &EnsembleSummary, model: &M, tol: FluidTolerance) -> TestReport {
    let mut sup = 0.0f64;
    let mut worst_se = 0.0f64;
    for (i, &t) in summary.grid.iter().enumerate() {
        let dev = (summary.mean_scaled_k[i] - model.fluid(t)).abs();
        sup = sup.max(dev);
        let se = summary.se_scaled_k[i];
        let in_se = if se > 0.0 {
            dev / se
        } else if dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_se = worst_se.max(in_se);
    }
    let se_ok = tol.se_band.is_none_or(|b| worst_se <= b);
    TestReport::new(
        "fluid_limit",
        sup,
        None,
        tol.abs_tol,
        sup <= tol.abs_tol && se_ok,
        format!(
            "sup deviation {sup:.3e} (tol {}), worst pointwise {worst_se:.2} SE",
            tol.abs_tol
        ),
    )
}

/// Drift `a + b t` and variance `c t` hypothesised for the fluctuations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianHypothesis {
    pub drift_intercept: f64,
    pub drift_slope: f64,
    pub variance_slope: f64,
}

impl GaussianHypothesis {
    pub fn from_params(params: &LimitParams) -> Self {
        Self {
            drift_intercept: params.beta1,
            drift_slope: -params.beta2 / 2.0,
            variance_slope: params.alpha / 2.0,
        }
    }

    pub fn drift(&self, t: f64) -> f64 {
        self.drift_intercept + self.drift_slope * t
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.variance_slope * t
    }
}

/// Grid time printed to ten significant digits, hiding representation noise
/// such as `0.8099999999999999`.
struct Short(f64);

impl std::fmt::Display for Short {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v: f64 = format!("{:.9e}", self.0).parse().unwrap_or(self.0);
        write!(f, "{v}")
    }
}

fn positive_points(grid: &[f64]) -> Vec<usize> {
    (0..grid.len()).filter(|&i| grid[i] > 0.0).collect()
}

/// KS test of `Z(t) - drift(t)` against `N(0, variance(t))` at each positive
/// grid point, Bonferroni-corrected to family level `level`.
pub fn ks_marginals(paths: &[ScaledTrajectory], hyp: &GaussianHypothesis, level: f64) -> TestReport {
    let Some(first) = paths.first() else {
        return TestReport::new("ks_marginals", f64::NAN, None, level, false, "no paths".into());
    };
    let points = positive_points(&first.fluct.grid);
    if points.is_empty() {
        let mut r = TestReport::new("ks_marginals", 0.0, None, level, true, "no positive grid points".into());
        r.verdict = Verdict::Vacuous;
        return r;
    }
    let per_point = level / points.len() as f64;
    let mut min_p = 1.0f64;
    let mut worst_d = 0.0f64;
    let mut detail = Vec::new();
    for &i in &points {
        let t = first.fluct.grid[i];
        let xs: Vec<f64> = column(paths, i).iter().map(|z| z - hyp.drift(t)).collect();
        let sd = hyp.variance(t).sqrt();
        let res = match Normal::new(0.0, sd) {
            Ok(n) => stats::ks_one_sample(&xs, |x| n.cdf(x)),
            Err(_) => stats::KsResult {
                statistic: 1.0,
                p_value: 0.0,
            },
        };
        min_p = min_p.min(res.p_value);
        worst_d = worst_d.max(res.statistic);
        detail.push(format!("t={}: D={:.4} p={:.3e}", Short(t), res.statistic, res.p_value));
    }
    TestReport::new(
        "ks_marginals",
        worst_d,
        Some(min_p),
        per_point,
        min_p > per_point,
        detail.join("; "),
    )
}

/// `|Var Z(t) / variance(t) - 1| <= rel_tol` at each positive grid point.
pub fn variance_ratio(summary: &EnsembleSummary, hyp: &GaussianHypothesis, rel_tol: f64) -> TestReport {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for i in positive_points(&summary.grid) {
        let t = summary.grid[i];
        let ratio = summary.var_z[i] / hyp.variance(t);
        worst = worst.max((ratio - 1.0).abs());
        detail.push(format!("t={}: ratio {ratio:.4}", Short(t)));
    }
    TestReport::new(
        "variance_ratio",
        worst,
        None,
        rel_tol,
        worst <= rel_tol,
        detail.join("; "),
    )
}

/// `|Cov(Z(s), Z(t)) - variance(s)| <= rel_tol * variance(s)` for `0 < s < t`.
pub fn covariance_structure(summary: &EnsembleSummary, hyp: &GaussianHypothesis, rel_tol: f64) -> TestReport {
    let pts = positive_points(&summary.grid);
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (a, &i) in pts.iter().enumerate() {
        for &j in &pts[a + 1..] {
            let s = summary.grid[i];
            let expected = hyp.variance(s);
            let rel = (summary.cov_z[i][j] - expected).abs() / expected;
            worst = worst.max(rel);
            detail.push(format!(
                "({},{}): cov {:.4} vs {expected:.4}",
                Short(s),
                Short(summary.grid[j]),
                summary.cov_z[i][j]
            ));
        }
    }
    TestReport::new(
        "covariance_structure",
        worst,
        None,
        rel_tol,
        worst <= rel_tol,
        detail.join("; "),
    )
}

/// `|Corr(Z(s), Z(t) - Z(s))| <= tol` for `0 < s < t`.
pub fn increment_independence(paths: &[ScaledTrajectory], tol: f64) -> TestReport {
    let Some(first) = paths.first() else {
        return TestReport::new("increment_independence", f64::NAN, None, tol, false, "no paths".into());
    };
    let pts = positive_points(&first.fluct.grid);
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (a, &i) in pts.iter().enumerate() {
        let zs = column(paths, i);
        for &j in &pts[a + 1..] {
            let inc: Vec<f64> = column(paths, j).iter().zip(&zs).map(|(zt, zs)| zt - zs).collect();
            let c = stats::correlation(&zs, &inc);
            worst = worst.max(c.abs());
            detail.push(format!(
                "({},{}): {c:.4}",
                Short(first.fluct.grid[i]),
                Short(first.fluct.grid[j])
            ));
        }
    }
    TestReport::new(
        "increment_independence",
        worst,
        None,
        tol,
        worst <= tol,
        detail.join("; "),
    )
}

/// Minimum ensemble size for [`test_gaussian_fluctuations`].
pub const GAUSSIAN_MIN_REPS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFluctuationReport {
    pub marginals: TestReport,
    pub variance: TestReport,
    pub covariance: TestReport,
    pub increments: TestReport,
}

impl GaussianFluctuationReport {
    pub fn parts(&self) -> [&TestReport; 4] {
        [&self.marginals, &self.variance, &self.covariance, &self.increments]
    }

    pub fn overall(&self) -> TestReport {
        let ok = self.parts().iter().all(|r| r.passed());
        let failed: Vec<&str> = self
            .parts()
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.name.as_str())
            .collect();
        TestReport::new(
            "gaussian_fluctuations",
            failed.len() as f64,
            self.marginals.p_value,
            0.01,
            ok,
            if ok {
                "all parts pass".into()
            } else {
                format!("failed: {}", failed.join(", "))
            },
        )
    }
}

/// Composite check that the fluctuations look like `drift + B(c t)`:
/// KS marginals at family level 0.01, variance ratio within 15%, covariance
/// within 20% and increment correlation within 0.1.
pub fn test_gaussian_fluctuations(
    summary: &EnsembleSummary,
    paths: &[ScaledTrajectory],
    hyp: &GaussianHypothesis,
) -> Result<GaussianFluctuationReport> {
    if summary.rep_count < GAUSSIAN_MIN_REPS || paths.len() < GAUSSIAN_MIN_REPS {
        return Err(Error::TooFewPaths {
            needed: GAUSSIAN_MIN_REPS,
            got: paths.len().min(summary.rep_count),
        });
    }
    Ok(GaussianFluctuationReport {
        marginals: ks_marginals(paths, hyp, 0.01),
        variance: variance_ratio(summary, hyp, 0.15),
        covariance: covariance_structure(summary, hyp, 0.2),
        increments: increment_independence(paths, 0.1),
    })
}

/// Fitted affine drift of the mean fluctuation over the positive grid.
pub fn drift_fit(summary: &EnsembleSummary) -> stats::LinearFit {
    let pts = positive_points(&summary.grid);
    let xs: Vec<f64> = pts.iter().map(|&i| summary.grid[i]).collect();
    let ys: Vec<f64> = pts.iter().map(|&i| summary.mean_z[i]).collect();
    stats::linear_fit(&xs, &ys)
}

/// Passes when the fitted drift slope is within `tol` of `expected_slope`.
pub fn test_drift_slope(summary: &EnsembleSummary, expected_slope: f64, tol: f64) -> TestReport {
    let fit = drift_fit(summary);
    let dev = (fit.slope - expected_slope).abs();
    TestReport::new(
        "drift_slope",
        fit.slope,
        None,
        tol,
        dev <= tol,
        format!(
            "fit {:.4} + {:.4} t (slope se {:.4}); expected slope {expected_slope}",
            fit.intercept, fit.slope, fit.slope_se
        ),
    )
}

/// Upper bound on `E[S2(t)]` for `t < 1/sigma2`.
pub fn second_moment_bound(t: f64, sigma2: f64) -> f64 {
    sigma2 / (1.0 - t * sigma2)
}

/// Checks the empirical mean of `S2(t)` against the second-moment bound with
/// a `se_mult` relative-standard-error allowance.
pub fn second_moment_bound_check(
    trajs: &[Trajectory],
    mv: &MassVector,
    grid: &[f64],
    se_mult: f64,
) -> Result<TestReport> {
    let sigma2 = mv.summary().sigma2;
    let limit = 1.0 / sigma2;
    if let Some(&bad) = grid.iter().find(|&&t| t >= limit) {
        return Err(Error::BeyondMomentWindow(bad, limit));
    }
    if grid.is_empty() || mv.kappa() < 2 {
        return Ok(TestReport {
            name: "second_moment_bound".into(),
            statistic: 0.0,
            p_value: None,
            tolerance: se_mult,
            verdict: Verdict::Vacuous,
            detail: "empty grid or single component".into(),
        });
    }
    if trajs.len() < 2 {
        return Err(Error::TooFewPaths {
            needed: 2,
            got: trajs.len(),
        });
    }
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut detail = Vec::new();
    for &t in grid {
        let s2: Vec<f64> = trajs.iter().map(|tr| tr.s2_at(t)).collect::<Result<_>>()?;
        let mean = stats::mean(&s2);
        let rel_se = (stats::variance(&s2) / s2.len() as f64).sqrt() / mean;
        let bound = second_moment_bound(t, sigma2);
        ok &= mean <= bound * (1.0 + se_mult * rel_se);
        worst = worst.max(mean / bound);
        detail.push(format!("t={}: mean {mean:.4} bound {bound:.4}", Short(t)));
    }
    Ok(TestReport::new(
        "second_moment_bound",
        worst,
        None,
        se_mult,
        ok,
        detail.join("; "),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSuiteReport {
    pub mean: TestReport,
    pub variance_identity: TestReport,
    pub bracket: TestReport,
}

impl MartingaleSuiteReport {
    pub fn parts(&self) -> [&TestReport; 3] {
        [&self.mean, &self.variance_identity, &self.bracket]
    }

    pub fn passed(&self) -> bool {
        self.parts().iter().all(|r| r.passed())
    }
}

/// Mean of `M(t)` within `se_mult` SE of zero, `Var M(t)` within `se_mult`
/// SE of the mean of `<M>_t`, and `[M] = kappa - K` on every path, where
/// `[M]` is rebuilt from the jumps of `M`.
pub fn martingale_suite(paths: &[MartingalePath], grid: &[f64], se_mult: f64) -> Result<MartingaleSuiteReport> {
    if paths.len() < 2 {
        return Err(Error::TooFewPaths {
            needed: 2,
            got: paths.len(),
        });
    }
    let r = paths.len() as f64;
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut mean_detail = Vec::new();
    let mut var_detail = Vec::new();
    for &t in grid {
        let vals = paths.iter().map(|p| p.value_at(t)).collect::<Result<Vec<_>>>()?;
        let m: Vec<f64> = vals.iter().map(|v| v.m).collect();
        let a: Vec<f64> = vals.iter().map(|v| v.angle).collect();
        let mean_m = stats::mean(&m);
        let se_m = (stats::variance(&m) / r).sqrt();
        let z_mean = if se_m > 0.0 {
            mean_m.abs() / se_m
        } else if mean_m == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_mean = worst_mean.max(z_mean);
        mean_detail.push(format!("t={}: mean {mean_m:.4e} ({z_mean:.2} SE)", Short(t)));

        let var_m = stats::variance(&m);
        let mean_a = stats::mean(&a);
        let d: Vec<f64> = m.iter().zip(&a).map(|(mi, ai)| (mi - mean_m).powi(2) - ai).collect();
        let se_d = (stats::variance(&d) / r).sqrt();
        let gap = var_m - mean_a;
        let z_var = if se_d > 0.0 {
            gap.abs() / se_d
        } else if gap.abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_var = worst_var.max(z_var);
        var_detail.push(format!(
            "t={}: var {var_m:.4} vs <M> {mean_a:.4} ({z_var:.2} SE)",
            Short(t)
        ));
    }

    let mut bad_paths = 0usize;
    for p in paths {
        let mut jumps_sq = 0.0;
        let mut ok = true;
        for i in 1..p.times.len() {
            let left_limit = p.m[i - 1] + (p.angle[i] - p.angle[i - 1]);
            let jump = p.m[i] - left_limit;
            jumps_sq += jump * jump;
            ok &= jumps_sq.round() as u64 == p.bracket[i]
                && (jumps_sq - jumps_sq.round()).abs() < 1e-6
                && p.bracket[i] as usize + p.k(i) == p.kappa();
        }
        if !ok {
            bad_paths += 1;
        }
    }

    Ok(MartingaleSuiteReport {
        mean: TestReport::new(
            "martingale_mean",
            worst_mean,
            None,
            se_mult,
            worst_mean <= se_mult,
            mean_detail.join("; "),
        ),
        variance_identity: TestReport::new(
            "martingale_variance_identity",
            worst_var,
            None,
            se_mult,
            worst_var <= se_mult,
            var_detail.join("; "),
        ),
        bracket: TestReport::new(
            "martingale_bracket",
            bad_paths as f64,
            None,
            0.0,
            bad_paths == 0,
            format!("{bad_paths} of {} paths violate [M] = kappa - K", paths.len()),
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannRow {
    pub n: usize,
    pub sum: f64,
    pub scaled_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiemannTable {
    pub rows: Vec<RiemannRow>,
    pub strictly_decreasing: bool,
    pub final_below_third: bool,
}

impl RiemannTable {
    pub fn report(&self) -> TestReport {
        let first = self.rows.first().map_or(f64::NAN, |r| r.scaled_error);
        let last = self.rows.last().map_or(f64::NAN, |r| r.scaled_error);
        TestReport::new(
            "riemann_convergence",
            last / first,
            None,
            1.0 / 3.0,
            self.strictly_decreasing && self.final_below_third,
            self.rows
                .iter()
                .map(|r| format!("n={}: e={:.6}", r.n, r.scaled_error))
                .collect::<Vec<_>>()
                .join("; "),
        )
    }
}

/// Right-endpoint Riemann sums `S_n = (1/n) sum phi(k/n)` of a
/// non-increasing `phi` and the scaled errors `sqrt(n) |integral - S_n|`.
pub fn riemann_convergence<F: Fn(f64) -> f64>(phi: F, integral: f64, n_grid: &[usize]) -> Result<RiemannTable> {
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(Error::InvalidGrid("n must be positive".into()));
        }
        let values: Vec<f64> = (1..=n).map(|k| phi(k as f64 / n as f64)).collect();
        if let Some(k) = values.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::IncreasingFunction(
                (k + 1) as f64 / n as f64,
                (k + 2) as f64 / n as f64,
            ));
        }
        let sum = compensated_sum(values) / n as f64;
        rows.push(RiemannRow {
            n,
            sum,
            scaled_error: (n as f64).sqrt() * (integral - sum).abs(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].scaled_error < w[0].scaled_error);
    let final_below_third = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b.scaled_error < a.scaled_error / 3.0,
        _ => false,
    };
    Ok(RiemannTable {
        rows,
        strictly_decreasing,
        final_below_third,
    })
}

/// [`riemann_convergence`] for `phi(x) = F^{-1}(1 - x)^power`, whose
/// integral is `E[W^power]`.
pub fn riemann_convergence_quantile(spec: &QuantileSpec, power: i32, n_grid: &[usize]) -> Result<RiemannTable> {
    riemann_convergence(|x| spec.upper_quantile(x).powi(power), spec.moment(power), n_grid)
}
