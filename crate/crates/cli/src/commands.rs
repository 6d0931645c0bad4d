use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mcgraph_core::analysis::{
    ensemble_stats, scale_trajectory, test_fluid, test_gaussian_fluctuations, FluidTolerance, GaussianHypothesis,
    LimitModel, TestReport, GAUSSIAN_MIN_REPS,
};
use mcgraph_core::engine::{run_ensemble_with, EnsembleSpec, RecordMode};
use mcgraph_core::io::{read_trajectory, write_ensemble_summary, write_k_distribution, write_masses, write_trajectory};
use mcgraph_core::mass::{limit_params_general, MassSummary};
use mcgraph_core::oracle::{exact_k_distribution, percolation_k_samples, KDistribution};
use mcgraph_core::rng::StreamSeed;
use mcgraph_core::stats;
use mcgraph_core::verify::{self, Profile, VerifyConfig};

use crate::config::{usage, Family, RunConfig};

/// No trajectories to work on; maps to exit status 3.
#[derive(Debug)]
pub struct NoData(pub String);

impl std::fmt::Display for NoData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NoData {}

/// One or more checks failed; maps to exit status 2.
#[derive(Debug)]
pub struct VerificationFailed(pub Vec<String>);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "failed: {}", self.0.join(", "))
    }
}

impl std::error::Error for VerificationFailed {}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GenerateSummary {
    family: Family,
    n: usize,
    sigma1: f64,
    sigma2: f64,
    kappa: usize,
    mass_vector_hash: String,
    varkappa: f64,
    varsigma: f64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    kappa_discrepancy: f64,
    alpha_discrepancy: f64,
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let mv = cfg.masses()?;
    let s = mv.summary();
    let p = cfg.params()?;
    let (_, diag) = limit_params_general(&s, p.varkappa, p.varsigma, p.alpha, p.beta1, p.beta2)?;
    fs::create_dir_all(cfg.out_dir())?;
    let mut w = create(&cfg.out_dir().join("masses.csv"))?;
    write_masses(&mut w, &mv)?;
    w.flush()?;
    let summary = GenerateSummary {
        family: cfg.family,
        n: cfg.n,
        sigma1: s.sigma1,
        sigma2: s.sigma2,
        kappa: s.kappa,
        mass_vector_hash: mv.spec_hash(),
        varkappa: p.varkappa,
        varsigma: p.varsigma,
        alpha: p.alpha,
        beta1: p.beta1,
        beta2: p.beta2,
        kappa_discrepancy: diag.kappa_discrepancy,
        alpha_discrepancy: diag.alpha_discrepancy,
    };
    write_json(&cfg.out_dir().join("summary.json"), &summary)?;
    println!("sigma1 = {}, sigma2 = {}, kappa = {}", s.sigma1, s.sigma2, s.kappa);
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SeedEntry {
    pub index: usize,
    pub master: u64,
    pub stream: u64,
    pub file: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: String,
    pub mass_vector_hash: String,
    pub horizon: f64,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub seeds: Vec<SeedEntry>,
}

pub const MANIFEST: &str = "manifest.json";

fn traj_name(i: usize) -> String {
    format!("traj_{i:05}.csv")
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let mv = cfg.masses()?;
    let horizon = cfg.horizon()?;
    let mode = cfg.record_mode()?;
    let dir = cfg.out_dir().to_path_buf();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let start = Instant::now();
    let spec = EnsembleSpec {
        masses: &mv,
        t_max: horizon,
        master_seed: cfg.seed,
        reps: cfg.reps,
        mode,
        workers: cfg.workers,
    };
    let written = run_ensemble_with(&spec, |tr| -> Result<()> {
        let mut w = create(&dir.join(traj_name(tr.seed.stream as usize)))?;
        write_trajectory(&mut w, &tr)?;
        w.flush()?;
        Ok(())
    })?;
    written.into_iter().collect::<Result<Vec<()>>>()?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: cfg.canonical(),
        mass_vector_hash: mv.spec_hash(),
        horizon,
        workers: cfg.workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        seeds: (0..cfg.reps)
            .map(|i| SeedEntry {
                index: i,
                master: cfg.seed,
                stream: i as u64,
                file: traj_name(i),
            })
            .collect(),
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    println!(
        "{} trajectories written to {} in {:.2}s",
        cfg.reps,
        dir.display(),
        manifest.wall_clock_seconds
    );
    Ok(())
}

fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(NoData(format!("no {MANIFEST} in {}", dir.display())).into());
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Serialize)]
struct AnalysisReports {
    config_hash: String,
    rep_count: usize,
    reports: Vec<TestReport>,
}

pub fn analyze(cfg: &RunConfig, fluid_tol: f64) -> Result<()> {
    let dir = cfg.out_dir();
    let manifest = load_manifest(dir)?;
    if manifest.config_hash != cfg.hash() {
        return usage(format!(
            "config hash {} does not match the trajectories in {} ({}); refusing to analyze with different parameters",
            cfg.hash(),
            dir.display(),
            manifest.config_hash
        ));
    }
    if manifest.seeds.is_empty() {
        return Err(NoData(format!("manifest in {} lists no trajectories", dir.display())).into());
    }
    let mv = cfg.masses()?;
    if mv.spec_hash() != manifest.mass_vector_hash {
        return usage("mass vector hash does not match the manifest");
    }
    let initial: MassSummary = mv.summary();
    let params = cfg.params()?;
    let grid = cfg.scaled_grid();

    let mut paths = Vec::with_capacity(manifest.seeds.len());
    for entry in &manifest.seeds {
        let path = dir.join(&entry.file);
        let text = fs::read_to_string(&path).map_err(|e| NoData(format!("reading {}: {e}", path.display())))?;
        let tr = read_trajectory(
            &text,
            initial,
            manifest.horizon,
            StreamSeed::new(entry.master, entry.stream),
        )?;
        paths.push(scale_trajectory(&tr, &params, &grid)?);
    }
    if paths.len() < 2 {
        return Err(NoData("need at least two trajectories to analyze".into()).into());
    }
    let summary = ensemble_stats(&paths)?;

    let mut reports = vec![test_fluid(&summary, &params, FluidTolerance::new(fluid_tol))];
    let original = cfg.original_time()?;
    let t_original: Vec<f64> = grid.iter().map(|&t| params.process_time(t)).collect();
    let fit = stats::linear_fit(&t_original, &summary.mean_scaled_k);
    let expected_slope = -params.varsigma * params.alpha / 2.0;
    let rel = ((fit.slope - expected_slope) / expected_slope).abs();
    reports.push(TestReport {
        name: "fluid_slope_original_time".into(),
        statistic: fit.slope,
        p_value: None,
        tolerance: 0.05,
        verdict: if rel <= 0.05 {
            mcgraph_core::analysis::Verdict::Pass
        } else {
            mcgraph_core::analysis::Verdict::Fail
        },
        detail: format!("slope {:.4} vs {expected_slope:.4}", fit.slope),
    });
    if summary.rep_count >= GAUSSIAN_MIN_REPS {
        let g = test_gaussian_fluctuations(&summary, &paths, &GaussianHypothesis::from_params(&params))?;
        reports.extend(g.parts().into_iter().cloned());
        reports.push(g.overall());
    } else {
        eprintln!(
            "skipping fluctuation tests: {} reps < {GAUSSIAN_MIN_REPS}",
            summary.rep_count
        );
    }

    let out = dir.join("analysis");
    fs::create_dir_all(&out)?;
    let mut w = create(&out.join("ensemble.csv"))?;
    write_ensemble_summary(&mut w, &summary, &params)?;
    w.flush()?;

    let mut w = create(&out.join("fluid_curve.csv"))?;
    writeln!(w, "t,t_original,mean_scaled_K,se,fluid")?;
    for (i, &t) in grid.iter().enumerate() {
        writeln!(
            w,
            "{t},{},{},{},{}",
            t_original[i],
            summary.mean_scaled_k[i],
            summary.se_scaled_k[i],
            original.fluid(t_original[i])
        )?;
    }
    w.flush()?;

    let mut w = create(&out.join("variance_curve.csv"))?;
    writeln!(w, "t,var_Z,se_var,limit_variance,mean_Z,se_mean,limit_drift")?;
    for (i, &t) in grid.iter().enumerate() {
        writeln!(
            w,
            "{t},{},{},{},{},{},{}",
            summary.var_z[i],
            summary.se_var_z[i],
            params.variance(t),
            summary.mean_z[i],
            summary.se_mean_z[i],
            params.drift(t)
        )?;
    }
    w.flush()?;

    for r in &reports {
        println!("{:<28} {:?}  {}", r.name, r.verdict, r.detail);
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.clone()).collect();
    write_json(
        &out.join("reports.json"),
        &AnalysisReports {
            config_hash: manifest.config_hash,
            rep_count: summary.rep_count,
            reports,
        },
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failed).into())
    }
}

pub fn oracle(cfg: &RunConfig, t: f64) -> Result<()> {
    let mv = cfg.masses()?;
    let exact: KDistribution = exact_k_distribution(&mv, t).or_else(|e| usage(e.to_string()))?;
    fs::create_dir_all(cfg.out_dir())?;
    let mut w = create(&cfg.out_dir().join("exact_k.csv"))?;
    write_k_distribution(&mut w, &exact)?;
    w.flush()?;

    let kappa = mv.kappa();
    let spec = EnsembleSpec {
        masses: &mv,
        t_max: t,
        master_seed: cfg.seed,
        reps: cfg.reps,
        mode: RecordMode::Grid(vec![t]),
        workers: cfg.workers,
    };
    let engine: Vec<usize> = run_ensemble_with(&spec, |tr| tr.k_at(t))?
        .into_iter()
        .collect::<Result<_, _>>()?;
    let perc = percolation_k_samples(&mv, t, cfg.seed ^ 0x5eed, cfg.reps, cfg.workers)?;
    let pe = stats::empirical_pmf(&engine, kappa);
    let pp = stats::empirical_pmf(&perc, kappa);
    let by_k = exact.by_k();

    let mut w = create(&cfg.out_dir().join("oracle_k.csv"))?;
    writeln!(w, "k,exact,engine,percolation")?;
    println!("k    exact        engine       percolation");
    for k in 1..=kappa {
        writeln!(w, "{k},{},{},{}", by_k[k], pe[k], pp[k])?;
        println!("{k:<4} {:<12.6} {:<12.6} {:<12.6}", by_k[k], pe[k], pp[k]);
    }
    w.flush()?;
    println!(
        "TV engine/exact {:.4}, percolation/exact {:.4}, engine/percolation {:.4} ({} reps)",
        stats::total_variation(&pe, &by_k),
        stats::total_variation(&pp, &by_k),
        stats::total_variation(&pe, &pp),
        cfg.reps
    );
    Ok(())
}

pub fn verify(profile: Profile, seed: Option<u64>, workers: usize, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = VerifyConfig {
        profile,
        workers,
        ..VerifyConfig::default()
    };
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let outcomes = verify::run_all(&cfg)?;
    for o in &outcomes {
        println!("{o}");
    }
    if let Some(dir) = out {
        fs::create_dir_all(&dir)?;
        write_json(&dir.join("verify.json"), &outcomes)?;
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("#{}", o.id))
        .collect();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failed).into())
    }
}
