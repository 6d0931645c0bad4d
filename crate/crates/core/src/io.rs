//! Plain CSV formats for mass vectors, trajectories, exact laws and ensemble
//! summaries. Floats are written with `Display`, which round-trips exactly.

use std::io::{self, Write};

use crate::analysis::{EnsembleSummary, LimitModel};
use crate::engine::{GridPoint, MergeEvent, Record, Trajectory};
use crate::error::{Error, Result};
use crate::mass::{MassSummary, MassVector};
use crate::oracle::KDistribution;
use crate::rng::StreamSeed;

pub const TRAJECTORY_FULL_HEADER: &str = "event_index,time,K,S2";
pub const TRAJECTORY_GRID_HEADER: &str = "t,K";
pub const ENSEMBLE_HEADER: &str = "t,mean_scaled_K,fluid,mean_Z,var_Z,se_mean,se_var";

pub fn write_masses<W: Write>(mut w: W, mv: &MassVector) -> io::Result<()> {
    writeln!(w, "mass")?;
    for m in mv.masses() {
        writeln!(w, "{m}")?;
    }
    Ok(())
}

fn data_lines<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == header => Ok(lines),
        Some((_, h)) => Err(Error::Parse(format!(
            "expected header `{header}`, found `{}`",
            h.trim()
        ))),
        None => Err(Error::Parse("empty file".into())),
    }
}

fn field<T: std::str::FromStr>(s: Option<&str>, line: usize) -> Result<T> {
    let s = s.ok_or_else(|| Error::Parse(format!("line {}: missing field", line + 1)))?;
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: cannot parse `{}`", line + 1, s.trim())))
}

/// Parses a `mass` CSV; the label `n` defaults to the number of rows.
pub fn read_masses(text: &str, n_label: Option<usize>) -> Result<MassVector> {
    let masses = data_lines(text, "mass")?
        .map(|(i, l)| field::<f64>(Some(l), i))
        .collect::<Result<Vec<_>>>()?;
    let n = n_label.unwrap_or(masses.len());
    MassVector::new(masses, n)
}

/// Full mode writes `event_index,time,K,S2` with the initial state as row 0;
/// grid mode writes `t,K`.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    match &traj.record {
        Record::Full(events) => {
            writeln!(w, "{TRAJECTORY_FULL_HEADER}")?;
            writeln!(w, "0,0,{},{}", traj.initial.kappa, traj.initial.sigma2)?;
            for (i, e) in events.iter().enumerate() {
                writeln!(w, "{},{},{},{}", i + 1, e.time, e.k_after, e.s2_after)?;
            }
        }
        Record::Grid(points) => {
            writeln!(w, "{TRAJECTORY_GRID_HEADER}")?;
            for p in points {
                writeln!(w, "{},{}", p.t, p.k)?;
            }
        }
    }
    Ok(())
}

/// Rebuilds a trajectory from either CSV layout. `initial` supplies `S1`,
/// which the file does not carry.
pub fn read_trajectory(text: &str, initial: MassSummary, t_max: f64, seed: StreamSeed) -> Result<Trajectory> {
    let header = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .map(str::trim)
        .unwrap_or_default();
    let record = if header == TRAJECTORY_FULL_HEADER {
        let mut events = Vec::new();
        for (i, line) in data_lines(text, TRAJECTORY_FULL_HEADER)? {
            let mut parts = line.split(',');
            let idx: usize = field(parts.next(), i)?;
            let time: f64 = field(parts.next(), i)?;
            let k: usize = field(parts.next(), i)?;
            let s2: f64 = field(parts.next(), i)?;
            if idx == 0 {
                if k != initial.kappa {
                    return Err(Error::Parse(format!(
                        "initial K {k} does not match kappa {}",
                        initial.kappa
                    )));
                }
                continue;
            }
            events.push(MergeEvent {
                time,
                k_after: k,
                s2_after: s2,
            });
        }
        Record::Full(events)
    } else {
        let points = data_lines(text, TRAJECTORY_GRID_HEADER)?
            .map(|(i, line)| {
                let mut parts = line.split(',');
                Ok(GridPoint {
                    t: field(parts.next(), i)?,
                    k: field(parts.next(), i)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Record::Grid(points)
    };
    Ok(Trajectory {
        initial,
        seed,
        t_max,
        beyond_moment_window: t_max * initial.sigma2 >= 1.0,
        record,
    })
}

pub fn write_k_distribution<W: Write>(mut w: W, dist: &KDistribution) -> io::Result<()> {
    writeln!(w, "k,prob")?;
    for (i, p) in dist.probs.iter().enumerate() {
        writeln!(w, "{},{p}", i + 1)?;
    }
    Ok(())
}

pub fn write_ensemble_summary<W: Write, M: LimitModel + ?Sized>(
    mut w: W,
    summary: &EnsembleSummary,
    model: &M,
) -> io::Result<()> {
    writeln!(w, "{ENSEMBLE_HEADER}")?;
    for (i, &t) in summary.grid.iter().enumerate() {
        writeln!(
            w,
            "{t},{},{},{},{},{},{}",
            summary.mean_scaled_k[i],
            model.fluid(t),
            summary.mean_z[i],
            summary.var_z[i],
            summary.se_mean_z[i],
            summary.se_var_z[i]
        )?;
    }
    Ok(())
}
