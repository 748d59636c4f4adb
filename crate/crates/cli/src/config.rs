//! Flat `key = value` run configuration.
//!
//! A document may name a preset and then override individual keys. The
//! preset is applied first wherever it appears; the remaining lines apply
//! in file order, so a repeated key keeps its last value. Serialising a
//! config writes the preset line followed by every explicitly set key in a
//! fixed order, which parses back to the same config.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use sdpp_core::ensemble::ToleranceSpec;
use sdpp_core::model::{self, HistorySample, EXISTENCE_CHECK};
use sdpp_core::oracle::Scheme;
use sdpp_core::{DelaySpec, HistorySpec, JumpClock, ModelParams, NoiseSpec, State, StepConfig};
use thiserror::Error;

use crate::presets::{Preset, PresetValues};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{}{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default(), key.as_ref().map(|k| format!("key `{k}`: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(line: Option<usize>, key: Option<Key>, message: impl Into<String>) -> Self {
        Self {
            line,
            key: key.map(|k| k.name().to_string()),
            message: message.into(),
        }
    }
}

macro_rules! keys {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Every accepted configuration key, in canonical order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Key { $($variant),* }

        impl Key {
            pub const ALL: &'static [Key] = &[$(Key::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Key::$variant => $name),* }
            }
        }
    };
}

keys! {
    Preset => "preset",
    R1 => "r1",
    R2 => "r2",
    K1 => "K1",
    K2 => "K2",
    Alpha1 => "alpha1",
    Alpha2 => "alpha2",
    Alpha3 => "alpha3",
    Beta => "beta",
    Delta => "delta",
    A1 => "a1",
    A2 => "a2",
    Sigma1 => "sigma1",
    Sigma2 => "sigma2",
    Sigma3 => "sigma3",
    Q1 => "q1",
    Q2 => "q2",
    Q3 => "q3",
    Lambda => "lambda",
    JumpClock => "jump_clock",
    Tau1 => "tau1",
    Tau2 => "tau2",
    Tau3 => "tau3",
    X0 => "x0",
    Y0 => "y0",
    Z0 => "z0",
    HistoryFile => "history_file",
    Dt => "dt",
    TEnd => "t_end",
    Seed => "seed",
    PositivityFloor => "positivity_floor",
    NReps => "n_reps",
    RecordPoints => "record_points",
    TolExtinction => "tol_extinction",
    TolSlack => "tol_slack",
    DtList => "dt_list",
    ReferenceDt => "reference_dt",
    Scheme => "scheme",
    SweepParam => "sweep_param",
    SweepValues => "sweep_values",
    SweepMode => "sweep_mode",
    Output => "output",
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Key {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Key::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown key `{s}`"))
    }
}

impl Key {
    /// Keys that a sweep may vary.
    pub fn is_sweepable(self) -> bool {
        matches!(
            self,
            Key::R1
                | Key::R2
                | Key::K1
                | Key::K2
                | Key::Alpha1
                | Key::Alpha2
                | Key::Alpha3
                | Key::Beta
                | Key::Delta
                | Key::A1
                | Key::A2
                | Key::Sigma1
                | Key::Sigma2
                | Key::Sigma3
                | Key::Q1
                | Key::Q2
                | Key::Q3
                | Key::Lambda
                | Key::Tau1
                | Key::Tau2
                | Key::Tau3
                | Key::X0
                | Key::Y0
                | Key::Z0
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    #[default]
    Simulate,
    Ensemble,
}

/// A parsed value for one key.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    Num(f64),
    Count(u64),
    Path(PathBuf),
    Preset(Preset),
    Clock(JumpClock),
    Scheme(Scheme),
    Mode(SweepMode),
    Nums(Vec<f64>),
    Keys(Vec<Key>),
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        match self {
            Setting::Num(v) => write!(f, "{v}"),
            Setting::Count(v) => write!(f, "{v}"),
            Setting::Path(p) => write!(f, "{}", p.display()),
            Setting::Preset(p) => write!(f, "{p}"),
            Setting::Clock(JumpClock::Shared) => f.write_str("shared"),
            Setting::Clock(JumpClock::Independent) => f.write_str("independent"),
            Setting::Scheme(Scheme::EulerEngine) => f.write_str("euler"),
            Setting::Scheme(Scheme::Rk4) => f.write_str("rk4"),
            Setting::Mode(SweepMode::Simulate) => f.write_str("simulate"),
            Setting::Mode(SweepMode::Ensemble) => f.write_str("ensemble"),
            Setting::Nums(v) => f.write_str(&join(v)),
            Setting::Keys(v) => f.write_str(&join(v)),
        }
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("malformed number `{s}`"))?;
    if !v.is_finite() {
        return Err(format!("value `{s}` is not finite"));
    }
    Ok(v)
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let v: Vec<T> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(item)
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

impl Setting {
    pub fn parse(key: Key, raw: &str) -> Result<Setting, String> {
        let raw = raw.trim();
        Ok(match key {
            Key::Preset => Setting::Preset(raw.parse()?),
            Key::Seed | Key::NReps | Key::RecordPoints => Setting::Count(
                raw.parse()
                    .map_err(|_| format!("malformed non-negative integer `{raw}`"))?,
            ),
            Key::HistoryFile | Key::Output => {
                if raw.is_empty() {
                    return Err("empty path".into());
                }
                Setting::Path(PathBuf::from(raw))
            }
            Key::JumpClock => Setting::Clock(match raw {
                "shared" => JumpClock::Shared,
                "independent" => JumpClock::Independent,
                _ => return Err(format!("expected `shared` or `independent`, got `{raw}`")),
            }),
            Key::Scheme => Setting::Scheme(match raw {
                "euler" => Scheme::EulerEngine,
                "rk4" => Scheme::Rk4,
                _ => return Err(format!("expected `euler` or `rk4`, got `{raw}`")),
            }),
            Key::SweepMode => Setting::Mode(match raw {
                "simulate" => SweepMode::Simulate,
                "ensemble" => SweepMode::Ensemble,
                _ => return Err(format!("expected `simulate` or `ensemble`, got `{raw}`")),
            }),
            Key::DtList | Key::SweepValues => Setting::Nums(parse_list(raw, parse_num)?),
            Key::SweepParam => Setting::Keys(parse_list(raw, |s| {
                let k: Key = s.parse()?;
                if !k.is_sweepable() {
                    return Err(format!("`{k}` cannot be swept"));
                }
                Ok(k)
            })?),
            _ => Setting::Num(parse_num(raw)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub params: Vec<Key>,
    pub values: Vec<f64>,
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    /// Explicitly set keys other than `preset`.
    pub overrides: BTreeMap<Key, Setting>,
    pub params: ModelParams,
    pub noise: NoiseSpec,
    pub delays: DelaySpec,
    pub initial: State,
    pub history_file: Option<PathBuf>,
    pub step: StepConfig,
    pub n_reps: usize,
    pub record_points: usize,
    pub tol: ToleranceSpec,
    pub dt_list: Vec<f64>,
    pub reference_dt: Option<f64>,
    pub scheme: Scheme,
    pub sweep: Option<SweepSpec>,
    pub output: Option<PathBuf>,
}

pub const DEFAULT_N_REPS: usize = 200;
pub const DEFAULT_RECORD_POINTS: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;

impl RunConfig {
    /// Defaults with no preset: the first published column.
    pub fn base(preset: Option<Preset>) -> Self {
        let v: PresetValues = preset.unwrap_or(Preset::Fig1).values();
        RunConfig {
            preset,
            overrides: BTreeMap::new(),
            params: v.params,
            noise: v.noise,
            delays: v.delays,
            initial: v.initial,
            history_file: None,
            step: StepConfig::new(v.dt, v.t_end, DEFAULT_SEED),
            n_reps: DEFAULT_N_REPS,
            record_points: DEFAULT_RECORD_POINTS,
            tol: ToleranceSpec::default(),
            dt_list: vec![1e-2, 5e-3, 2.5e-3],
            reference_dt: None,
            scheme: Scheme::EulerEngine,
            sweep: v.sweep.map(|(params, values)| SweepSpec {
                params,
                values,
                mode: SweepMode::Simulate,
            }),
            output: None,
        }
    }

    /// True when `a1`/`a2` fell back to the assumed value.
    pub fn a_assumed(&self) -> bool {
        let defined = self.preset.is_some_and(|p| p.values().defines_a);
        !defined && !(self.overrides.contains_key(&Key::A1) && self.overrides.contains_key(&Key::A2))
    }

    pub fn history(&self) -> Result<HistorySpec, ConfigError> {
        match &self.history_file {
            None => HistorySpec::constant(self.initial.x, self.initial.y, self.initial.z)
                .map_err(|e| ConfigError::new(None, Some(Key::X0), e.to_string())),
            Some(path) => read_history(path),
        }
    }

    /// Overwrites one numeric model field. Used by overrides and sweeps.
    pub fn set_number(&mut self, key: Key, v: f64) -> Result<(), String> {
        let p = &mut self.params;
        let n = &mut self.noise;
        match key {
            Key::R1 => p.r1 = v,
            Key::R2 => p.r2 = v,
            Key::K1 => p.k1 = v,
            Key::K2 => p.k2 = v,
            Key::Alpha1 => p.alpha1 = v,
            Key::Alpha2 => p.alpha2 = v,
            Key::Alpha3 => p.alpha3 = v,
            Key::Beta => p.beta = v,
            Key::Delta => p.delta = v,
            Key::A1 => p.a1 = v,
            Key::A2 => p.a2 = v,
            Key::Sigma1 => n.sigma[0] = v,
            Key::Sigma2 => n.sigma[1] = v,
            Key::Sigma3 => n.sigma[2] = v,
            Key::Q1 | Key::Q2 | Key::Q3 => {
                if v <= -1.0 {
                    return Err(format!("{key} = {v} violates q > -1 (a jump would wipe out or flip the population)"));
                }
                let i = [Key::Q1, Key::Q2, Key::Q3].iter().position(|k| *k == key).unwrap();
                n.q[i] = v;
            }
            Key::Lambda => n.lambda = v,
            Key::Tau1 => self.delays.tau1 = v,
            Key::Tau2 => self.delays.tau2 = v,
            Key::Tau3 => self.delays.tau3 = v,
            Key::X0 => self.initial.x = v,
            Key::Y0 => self.initial.y = v,
            Key::Z0 => self.initial.z = v,
            Key::Dt => self.step.dt = v,
            Key::TEnd => self.step.t_end = v,
            Key::PositivityFloor => self.step.positivity_floor = v,
            Key::TolExtinction => self.tol.extinction = v,
            Key::TolSlack => self.tol.slack = v,
            Key::ReferenceDt => self.reference_dt = Some(v),
            _ => return Err(format!("`{key}` is not a numeric key")),
        }
        Ok(())
    }

    fn apply(&mut self, key: Key, s: &Setting) -> Result<(), String> {
        match (key, s) {
            (_, Setting::Num(v)) => self.set_number(key, *v)?,
            (Key::Seed, Setting::Count(v)) => self.step.seed = *v,
            (Key::NReps, Setting::Count(v)) => self.n_reps = *v as usize,
            (Key::RecordPoints, Setting::Count(v)) => self.record_points = *v as usize,
            (Key::HistoryFile, Setting::Path(p)) => self.history_file = Some(p.clone()),
            (Key::Output, Setting::Path(p)) => self.output = Some(p.clone()),
            (Key::JumpClock, Setting::Clock(c)) => self.step.jump_clock = *c,
            (Key::Scheme, Setting::Scheme(s)) => self.scheme = *s,
            (Key::DtList, Setting::Nums(v)) => self.dt_list = v.clone(),
            (Key::SweepValues, Setting::Nums(v)) => self.sweep_mut().values = v.clone(),
            (Key::SweepParam, Setting::Keys(v)) => self.sweep_mut().params = v.clone(),
            (Key::SweepMode, Setting::Mode(m)) => self.sweep_mut().mode = *m,
            _ => return Err(format!("value `{s}` does not fit key `{key}`")),
        }
        Ok(())
    }

    fn sweep_mut(&mut self) -> &mut SweepSpec {
        self.sweep.get_or_insert_with(|| SweepSpec {
            params: Vec::new(),
            values: Vec::new(),
            mode: SweepMode::Simulate,
        })
    }

    /// Sets a key as if it had appeared in the config file.
    pub fn override_key(&mut self, key: Key, setting: Setting) -> Result<(), ConfigError> {
        let mut overrides = self.overrides.clone();
        overrides.insert(key, setting);
        *self = build(self.preset, overrides, &HashMap::new())?;
        Ok(())
    }

    /// Canonical text form.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        if let Some(p) = self.preset {
            out.push_str(&format!("preset = {p}\n"));
        }
        for (k, v) in &self.overrides {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// One-line summary of explicit overrides for output metadata. The
    /// output path is left out so that reruns to another file match.
    pub fn overrides_summary(&self) -> String {
        let parts: Vec<String> = self
            .overrides
            .iter()
            .filter(|(k, _)| **k != Key::Output)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("; ")
        }
    }

    /// Checks that need the whole config.
    pub fn check(&self) -> Result<(), ConfigError> {
        check(self, &HashMap::new())
    }
}

fn on_grid(tau: f64, dt: f64) -> bool {
    let k = (tau / dt).round();
    (k * dt - tau).abs() <= 1e-9 * tau.max(dt)
}

fn check(cfg: &RunConfig, lines: &HashMap<Key, usize>) -> Result<(), ConfigError> {
    let line = |k: Key| lines.get(&k).copied();
    let err = |k: Key, msg: String| ConfigError::new(line(k), Some(k), msg);

    let report = model::validate(&cfg.params, &cfg.noise, &cfg.delays);
    if let Some(c) = report.failures().find(|c| c.name != EXISTENCE_CHECK) {
        let key = c
            .name
            .split(|ch: char| !ch.is_alphanumeric() && ch != '_')
            .find_map(|w| w.parse::<Key>().ok());
        return Err(ConfigError::new(
            key.and_then(line),
            key,
            format!("{}: {}", c.name, c.detail),
        ));
    }
    if report.find(EXISTENCE_CHECK).is_some_and(|c| !c.passed) {
        warn!("delta <= alpha3: the global-solution hypothesis does not hold for these parameters");
    }
    let dt = cfg.step.dt;
    if !(dt > 0.0) {
        return Err(err(Key::Dt, format!("dt must be > 0, got {dt}")));
    }
    if !(cfg.step.t_end > 0.0) {
        return Err(err(Key::TEnd, format!("t_end must be > 0, got {}", cfg.step.t_end)));
    }
    if !(cfg.step.positivity_floor > 0.0) {
        return Err(err(Key::PositivityFloor, "positivity_floor must be > 0".into()));
    }
    for (k, tau) in [Key::Tau1, Key::Tau2, Key::Tau3].into_iter().zip(cfg.delays.as_array()) {
        if tau > 0.0 && !on_grid(tau, dt) {
            let blame = if line(Key::Dt) >= line(k) { Key::Dt } else { k };
            return Err(err(blame, format!("dt = {dt} does not divide {k} = {tau}")));
        }
    }
    for &h in &cfg.dt_list {
        if !(h > 0.0) {
            return Err(err(Key::DtList, format!("step {h} must be > 0")));
        }
        for (k, tau) in [Key::Tau1, Key::Tau2, Key::Tau3].into_iter().zip(cfg.delays.as_array()) {
            if tau > 0.0 && !on_grid(tau, h) {
                return Err(err(Key::DtList, format!("step {h} does not divide {k} = {tau}")));
            }
        }
    }
    if cfg.dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(err(Key::DtList, "steps must be strictly descending".into()));
    }
    if let Some(r) = cfg.reference_dt {
        if !(r > 0.0) {
            return Err(err(Key::ReferenceDt, format!("reference_dt must be > 0, got {r}")));
        }
    }
    if cfg.n_reps == 0 {
        return Err(err(Key::NReps, "n_reps must be at least 1".into()));
    }
    if cfg.record_points == 0 {
        return Err(err(Key::RecordPoints, "record_points must be at least 1".into()));
    }
    if !(cfg.tol.extinction > 0.0) {
        return Err(err(Key::TolExtinction, "tol_extinction must be > 0".into()));
    }
    if !(0.0..1.0).contains(&cfg.tol.slack) {
        return Err(err(Key::TolSlack, "tol_slack must lie in [0, 1)".into()));
    }
    if let Some(s) = &cfg.sweep {
        if s.params.is_empty() && !s.values.is_empty() {
            return Err(err(Key::SweepValues, "sweep_values given without sweep_param".into()));
        }
        if !s.params.is_empty() && s.values.is_empty() {
            return Err(err(Key::SweepParam, "sweep_param given without sweep_values".into()));
        }
        for &v in &s.values {
            let mut trial = cfg.clone();
            for &k in &s.params {
                trial.set_number(k, v).map_err(|m| err(Key::SweepValues, m))?;
            }
            let r = model::validate(&trial.params, &trial.noise, &trial.delays);
            if let Some(c) = r.failures().find(|c| c.name != EXISTENCE_CHECK) {
                return Err(err(Key::SweepValues, format!("value {v}: {}: {}", c.name, c.detail)));
            }
            for (k, tau) in [Key::Tau1, Key::Tau2, Key::Tau3].into_iter().zip(trial.delays.as_array()) {
                if tau > 0.0 && !on_grid(tau, dt) {
                    return Err(err(Key::SweepValues, format!("dt = {dt} does not divide {k} = {tau}")));
                }
            }
        }
    }
    let h = cfg.history()?;
    if !h.covers(cfg.delays.tau_max()) {
        return Err(err(
            Key::HistoryFile,
            format!("history does not span [-{}, 0]", cfg.delays.tau_max()),
        ));
    }
    Ok(())
}

fn build(
    preset: Option<Preset>,
    overrides: BTreeMap<Key, Setting>,
    lines: &HashMap<Key, usize>,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::base(preset);
    for (k, s) in &overrides {
        cfg.apply(*k, s)
            .map_err(|m| ConfigError::new(lines.get(k).copied(), Some(*k), m))?;
    }
    cfg.overrides = overrides;
    check(&cfg, lines)?;
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut preset = None;
    let mut overrides = BTreeMap::new();
    let mut lines = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let no = idx + 1;
        let body = raw_line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::new(Some(no), None, format!("expected `key = value`, got `{body}`")))?;
        let key: Key = k
            .trim()
            .parse()
            .map_err(|m: String| ConfigError::new(Some(no), None, m))?;
        let setting = Setting::parse(key, v).map_err(|m| ConfigError::new(Some(no), Some(key), m))?;
        if let Setting::Num(x) = setting {
            if matches!(key, Key::Q1 | Key::Q2 | Key::Q3) && x <= -1.0 {
                return Err(ConfigError::new(Some(no), Some(key), format!("{key} = {x} violates q > -1")));
            }
        }
        lines.insert(key, no);
        match setting {
            Setting::Preset(p) => preset = Some(p),
            s => {
                overrides.insert(key, s);
            }
        }
    }
    build(preset, overrides, &lines)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        key: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&text)
}

/// Reads a `t,x,y,z` table. Lines starting with `#` and a header are skipped.
pub fn read_history(path: &Path) -> Result<HistorySpec, ConfigError> {
    let fail = |m: String| ConfigError::new(None, Some(Key::HistoryFile), m);
    let text = std::fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| parse_num(f.trim()))
            .collect::<Result<_, _>>()
            .map_err(|m| fail(format!("{}:{}: {m}", path.display(), idx + 1)))?;
        if v.len() != 4 {
            return Err(fail(format!("{}:{}: expected 4 columns", path.display(), idx + 1)));
        }
        samples.push(HistorySample {
            t: v[0],
            state: State::new(v[1], v[2], v[3]),
        });
    }
    HistorySpec::table(samples).map_err(|e| fail(e.to_string()))
}
