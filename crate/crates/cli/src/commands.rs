//! Subcommand drivers.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use sdpp_core::analysis::classify;
use sdpp_core::ensemble::{run_ensemble, verify_regime, EnsembleError, EnsembleOptions};
use sdpp_core::oracle::{convergence_study, OracleError};
use sdpp_core::simulate;
use thiserror::Error;

use crate::config::{ConfigError, Key, RunConfig, SweepMode};
use crate::output::{self, Metadata};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("runtime fault: {0}")]
    Fault(String),
}

impl CliError {
    /// 1 for usage, configuration and output-path problems; 2 for faults
    /// raised while integrating.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Fault(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Ensemble,
    Classify,
    Convergence,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Ensemble => "ensemble",
            Command::Classify => "classify",
            Command::Convergence => "convergence",
            Command::Sweep => "sweep",
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs `write` against the configured output file, or `stdout` when none.
fn emit<F>(target: Option<&Path>, stdout: &mut dyn Write, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match target {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(io_err(path))?;
            w.flush().map_err(io_err(path))?;
            info!("wrote {}", path.display());
            Ok(())
        }
        None => write(stdout).map_err(io_err(Path::new("<stdout>"))),
    }
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

pub fn run(cmd: Command, cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Simulate => simulate_to(cfg, cfg.output.as_deref(), stdout, &[]),
        Command::Ensemble => ensemble_to(cfg, cfg.output.as_deref(), stdout, &[]),
        Command::Classify => run_classify(cfg, stdout),
        Command::Convergence => run_convergence(cfg, stdout),
        Command::Sweep => run_sweep(cfg, stdout),
    }
}

fn simulate_to(
    cfg: &RunConfig,
    target: Option<&Path>,
    stdout: &mut dyn Write,
    extra: &[(String, String)],
) -> Result<(), CliError> {
    let h = cfg.history()?;
    let traj = simulate(&cfg.params, &cfg.noise, &cfg.delays, &h, &cfg.step)
        .map_err(|e| CliError::Fault(format!("simulate: {e}")))?;
    let mut meta = Metadata::new("simulate", cfg);
    meta.push("floor_hits", traj.floor_hits.to_string());
    meta.push("jump_events", traj.jumps.len().to_string());
    for (k, v) in extra {
        meta.push(k, v.clone());
    }
    emit(target, stdout, |w| output::write_trajectory(w, &meta, &traj))
}

fn ensemble_to(
    cfg: &RunConfig,
    target: Option<&Path>,
    stdout: &mut dyn Write,
    extra: &[(String, String)],
) -> Result<(), CliError> {
    let h = cfg.history()?;
    let opts = EnsembleOptions::new(cfg.n_reps, cfg.step.seed).with_target_points(&cfg.step, cfg.record_points);
    let stats = run_ensemble(&cfg.params, &cfg.noise, &cfg.delays, &h, &cfg.step, &opts).map_err(|e| match e {
        EnsembleError::Config(m) => CliError::Config(ConfigError {
            line: None,
            key: Some(Key::NReps.name().into()),
            message: m,
        }),
        other => CliError::Fault(format!("ensemble: {other}")),
    })?;
    let report = classify(&cfg.params, &cfg.noise, &cfg.delays);
    let verification =
        verify_regime(&stats, &report, &cfg.tol).map_err(|e| CliError::Fault(format!("verification: {e}")))?;
    let mut meta = Metadata::new("ensemble", cfg);
    meta.push("n_reps", cfg.n_reps.to_string());
    meta.push("record_stride", opts.record_stride.to_string());
    meta.push("tol_extinction", cfg.tol.extinction.to_string());
    meta.push("tol_slack", cfg.tol.slack.to_string());
    for (k, v) in extra {
        meta.push(k, v.clone());
    }
    emit(target, stdout, |w| output::write_ensemble(w, &meta, &stats, Some(&verification)))?;
    let summary = verification.to_string();
    if target.is_some() {
        write!(stdout, "{summary}").map_err(stdout_err)?;
    } else {
        eprint!("{summary}");
    }
    Ok(())
}

fn run_classify(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let report = classify(&cfg.params, &cfg.noise, &cfg.delays);
    let mut text = String::new();
    if cfg.a_assumed() {
        text.push_str(&format!(
            "note: a1 = {}, a2 = {} are assumed values\n",
            cfg.params.a1, cfg.params.a2
        ));
    }
    text.push_str(&report.to_string());
    emit(cfg.output.as_deref(), stdout, |w| w.write_all(text.as_bytes()))
}

fn run_convergence(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let h = cfg.history()?;
    let finest = *cfg.dt_list.last().expect("dt_list is never empty");
    let reference_dt = cfg.reference_dt.unwrap_or(finest / 20.0);
    let table = convergence_study(
        &cfg.params,
        &cfg.delays,
        &h,
        &cfg.dt_list,
        cfg.step.t_end,
        cfg.scheme,
        reference_dt,
    )
    .map_err(|e| match e {
        OracleError::Config(m) => CliError::Config(ConfigError {
            line: None,
            key: Some(Key::DtList.name().into()),
            message: m,
        }),
        other => CliError::Fault(format!("convergence: {other}")),
    })?;
    let mut meta = Metadata::new("convergence", cfg);
    meta.push(
        "scheme",
        match cfg.scheme {
            sdpp_core::oracle::Scheme::EulerEngine => "euler",
            sdpp_core::oracle::Scheme::Rk4 => "rk4",
        },
    );
    emit(cfg.output.as_deref(), stdout, |w| output::write_convergence(w, &meta, &table))
}

/// File name for one sweep value.
pub fn sweep_file_name(index: usize, params: &[Key], value: f64) -> String {
    let names: Vec<&str> = params.iter().map(|k| k.name()).collect();
    format!("{index:02}_{}_{value}.csv", names.join("+"))
}

fn run_sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .filter(|s| !s.params.is_empty())
        .ok_or_else(|| ConfigError {
            line: None,
            key: Some(Key::SweepParam.name().into()),
            message: "sweep needs sweep_param and sweep_values (or a sweep preset)".into(),
        })?;
    let dir: PathBuf = cfg.output.clone().unwrap_or_else(|| PathBuf::from("sweep"));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let names: Vec<&str> = sweep.params.iter().map(|k| k.name()).collect();
    let mut index = String::new();
    let meta = Metadata::new("sweep", cfg);
    let mut buf = Vec::new();
    meta.write(&mut buf).expect("writing to memory");
    index.push_str(&String::from_utf8(buf).expect("utf-8 metadata"));
    index.push_str("file,param,value\n");
    for (i, &v) in sweep.values.iter().enumerate() {
        let mut run = cfg.clone();
        for &k in &sweep.params {
            run.set_number(k, v).map_err(|m| ConfigError {
                line: None,
                key: Some(Key::SweepValues.name().into()),
                message: m,
            })?;
        }
        let name = sweep_file_name(i, &sweep.params, v);
        let path = dir.join(&name);
        let extra = [("sweep".to_string(), format!("{} = {v}", names.join(", ")))];
        match sweep.mode {
            SweepMode::Simulate => simulate_to(&run, Some(&path), stdout, &extra)?,
            SweepMode::Ensemble => ensemble_to(&run, Some(&path), stdout, &extra)?,
        }
        index.push_str(&format!("{name},{},{v}\n", names.join("+")));
    }
    let index_path = dir.join("index.csv");
    std::fs::write(&index_path, index).map_err(io_err(&index_path))?;
    writeln!(stdout, "wrote {} sweep files and {}", sweep.values.len(), index_path.display())
        .map_err(stdout_err)?;
    Ok(())
}
