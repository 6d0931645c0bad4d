//! Runs the twelve acceptance criteria at their stated sizes and tolerances
//! and prints one line per criterion. Set `MCGRAPH_PROFILE=quick` for a
//! smaller smoke run.

use std::process::ExitCode;
use std::time::Instant;

use mcgraph_core::verify::{self, CriterionOutcome, Profile, VerifyConfig};
use mcgraph_core::Result;

fn timed<F: FnOnce() -> Result<CriterionOutcome>>(f: F) -> CriterionOutcome {
    let start = Instant::now();
    let mut o = f().unwrap_or_else(|e| CriterionOutcome {
        id: 0,
        name: "error",
        passed: false,
        detail: e.to_string(),
    });
    o.detail = format!("{} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
    println!("{o}");
    o
}

fn main() -> ExitCode {
    let profile = match std::env::var("MCGRAPH_PROFILE").as_deref() {
        Ok("quick") => Profile::Quick,
        _ => Profile::Full,
    };
    let cfg = VerifyConfig {
        profile,
        ..VerifyConfig::default()
    };
    println!("acceptance criteria ({profile:?} profile, seed {})", cfg.master_seed);

    let mut results = vec![timed(|| verify::criterion_1(&cfg))];
    match verify::er_fluctuations(&cfg) {
        Ok(er) => {
            results.push(timed(|| Ok(verify::criterion_2(&er, &cfg))));
            results.push(timed(|| verify::criterion_3(&er, &cfg)));
            results.push(timed(|| Ok(verify::criterion_4(&er, &cfg))));
        }
        Err(e) => results.push(timed(|| Err(e))),
    }
    results.push(timed(|| verify::criterion_5(&cfg)));
    match verify::unit_fifty(&cfg) {
        Ok(fifty) => {
            results.push(timed(|| verify::criterion_6(&fifty, &cfg)));
            results.push(timed(|| verify::criterion_7(&fifty, &cfg)));
        }
        Err(e) => results.push(timed(|| Err(e))),
    }
    results.push(timed(|| verify::criterion_8(&cfg)));
    results.push(timed(|| verify::criterion_9(&cfg)));
    results.push(timed(verify::criterion_10));
    results.push(timed(|| verify::criterion_11(&cfg)));
    results.push(timed(|| verify::criterion_12(&cfg)));

    let failed: Vec<u8> = results.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {failed:?}");
        ExitCode::FAILURE
    }
}
