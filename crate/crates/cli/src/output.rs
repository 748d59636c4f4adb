//! CSV writers. Every file starts with `#` metadata lines.

use std::io::{self, Write};

use sdpp_core::ensemble::{EnsembleStats, VerificationOutcome};
use sdpp_core::oracle::ConvergenceTable;
use sdpp_core::Trajectory;

use crate::config::RunConfig;

pub const TRAJECTORY_HEADER: &str = "t,x,y,z";

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metadata {
    pub command: String,
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut m = Metadata {
            command: command.to_string(),
            entries: Vec::new(),
        };
        m.push(
            "preset",
            cfg.preset.map(|p| p.name().to_string()).unwrap_or_else(|| "none".into()),
        );
        m.push("overrides", cfg.overrides_summary());
        m.push("seed", cfg.step.seed.to_string());
        m.push("dt", cfg.step.dt.to_string());
        m.push("t_end", cfg.step.t_end.to_string());
        m.push("a1_a2_assumed", cfg.a_assumed().to_string());
        if cfg.a_assumed() {
            m.push(
                "note",
                format!(
                    "a1 = {}, a2 = {} are assumed values, not published ones",
                    cfg.params.a1, cfg.params.a2
                ),
            );
        }
        m
    }

    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn write<W: Write + ?Sized>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# sdpp {}", self.command)?;
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

pub fn write_trajectory<W: Write + ?Sized>(w: &mut W, meta: &Metadata, traj: &Trajectory) -> io::Result<()> {
    meta.write(w)?;
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        writeln!(w, "{},{},{},{}", num(*t), num(s.x), num(s.y), num(s.z))?;
    }
    Ok(())
}

pub fn ensemble_header() -> String {
    let mut cols = vec!["t".to_string()];
    for s in ["x", "y", "z"] {
        for stat in ["mean", "sd", "q025", "q500", "q975"] {
            cols.push(format!("{stat}_{s}"));
        }
    }
    cols.join(",")
}

pub fn write_ensemble<W: Write + ?Sized>(
    w: &mut W,
    meta: &Metadata,
    stats: &EnsembleStats,
    verification: Option<&VerificationOutcome>,
) -> io::Result<()> {
    meta.write(w)?;
    writeln!(w, "# n_replicates: {}", stats.n_replicates)?;
    writeln!(w, "# floor_hits: {}", stats.floor_hits)?;
    let med = stats.median_terminal();
    writeln!(
        w,
        "# median_terminal_average: {},{},{}",
        num(med[0]),
        num(med[1]),
        num(med[2])
    )?;
    if let Some(v) = verification {
        writeln!(w, "# verification: {} {}", v.regime, v.outcome)?;
        for c in &v.checks {
            writeln!(w, "# check: {c}")?;
        }
    }
    writeln!(w, "{}", ensemble_header())?;
    for g in 0..stats.times.len() {
        let mut row = vec![num(stats.times[g])];
        for i in 0..3 {
            row.push(num(stats.mean[g][i]));
            row.push(num(stats.sd[g][i]));
            row.push(num(stats.q025[g][i]));
            row.push(num(stats.q500[g][i]));
            row.push(num(stats.q975[g][i]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_convergence<W: Write + ?Sized>(w: &mut W, meta: &Metadata, table: &ConvergenceTable) -> io::Result<()> {
    meta.write(w)?;
    writeln!(w, "# reference_dt: {}", table.reference_dt)?;
    match table.overall_order {
        Some(o) => writeln!(w, "# overall_order: {o}")?,
        None => writeln!(w, "# overall_order: none")?,
    }
    writeln!(w, "dt,max_err,order")?;
    for r in &table.rows {
        let order = r.order.map(num).unwrap_or_default();
        writeln!(w, "{},{},{}", num(r.dt), num(r.max_err), order)?;
    }
    Ok(())
}
