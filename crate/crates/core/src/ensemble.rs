//! Monte Carlo replicate sets and empirical regime checks.
//!
//! Replicate `k` draws from stream pair `k` of the run seed, so results do
//! not depend on scheduling. Replicates run on the rayon pool, land in a
//! slot indexed by `k`, and are reduced in index order.

use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{Regime, RegimeReport, RunningAverage};
use crate::engine::{EngineError, Integrator, StepConfig};
use crate::model::{self, DelaySpec, HistorySpec, ModelParams, NoiseSpec, State};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: EngineError,
    },
    #[error("statistics fingerprint {stats:016x} does not match report fingerprint {report:016x}")]
    Provenance { stats: u64, report: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleOptions {
    pub n_reps: usize,
    pub base_seed: u64,
    /// Keep every `record_stride`-th grid point in the per-gridpoint stats.
    /// Terminal time averages always use the full grid.
    pub record_stride: usize,
}

impl EnsembleOptions {
    pub fn new(n_reps: usize, base_seed: u64) -> Self {
        Self {
            n_reps,
            base_seed,
            record_stride: 1,
        }
    }

    pub fn with_record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Stride that keeps at most about `target` recorded points.
    pub fn with_target_points(self, c: &StepConfig, target: usize) -> Self {
        let stride = c.n_steps().div_ceil(target.max(1)).max(1);
        self.with_record_stride(stride)
    }
}

/// Output of a single replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub recorded: Vec<State>,
    pub terminal_average: [f64; 3],
    pub floor_hits: u64,
    /// FNV-1a hash over the bit patterns of every state on the full grid.
    pub checksum: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_replicates: usize,
    pub fingerprint: u64,
    pub base_seed: u64,
    pub times: Vec<f64>,
    pub mean: Vec<[f64; 3]>,
    pub sd: Vec<[f64; 3]>,
    pub q025: Vec<[f64; 3]>,
    pub q500: Vec<[f64; 3]>,
    pub q975: Vec<[f64; 3]>,
    /// Terminal running averages, one per replicate in index order.
    pub terminal_averages: Vec<[f64; 3]>,
    pub checksums: Vec<u64>,
    pub floor_hits: u64,
}

impl EnsembleStats {
    pub fn median_terminal(&self) -> [f64; 3] {
        std::array::from_fn(|i| {
            let mut v: Vec<f64> = self.terminal_averages.iter().map(|a| a[i]).collect();
            v.sort_by(f64::total_cmp);
            quantile_sorted(&v, 0.5)
        })
    }
}

/// Linear-interpolation sample quantile (R type 7) of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = h - lo as f64;
    if w == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn hash_state(mut h: u64, s: &State) -> u64 {
    for v in s.to_array() {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

pub fn run_replicate(
    p: &ModelParams,
    n: &NoiseSpec,
    d: &DelaySpec,
    h: &HistorySpec,
    c: &StepConfig,
    replicate: usize,
    record_stride: usize,
) -> Result<ReplicateSummary, EnsembleError> {
    let wrap = |source| EnsembleError::Replicate {
        index: replicate,
        source,
    };
    let mut it = Integrator::new(p, n, d, h, c, replicate as u64).map_err(wrap)?;
    let s0 = it.state();
    let mut avg = RunningAverage::new(0.0, &s0);
    let mut checksum = hash_state(FNV_OFFSET, &s0);
    let mut recorded = Vec::with_capacity(it.n_steps() / record_stride + 1);
    recorded.push(s0);
    let mut k = 0usize;
    while !it.is_finished() {
        let a = it.advance().map_err(wrap)?;
        k += 1;
        avg.push(a.time, &a.state);
        checksum = hash_state(checksum, &a.state);
        if k % record_stride == 0 {
            recorded.push(a.state);
        }
    }
    Ok(ReplicateSummary {
        recorded,
        terminal_average: avg.value(),
        floor_hits: it.floor_hits(),
        checksum,
    })
}

pub fn run_ensemble(
    p: &ModelParams,
    n: &NoiseSpec,
    d: &DelaySpec,
    h: &HistorySpec,
    c: &StepConfig,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats, EnsembleError> {
    let order: Vec<usize> = (0..opts.n_reps).collect();
    run_ensemble_in_order(p, n, d, h, c, opts, &order)
}

/// As [`run_ensemble`], with replicates dispatched in the given order.
/// `order` must be a permutation of `0..n_reps`.
pub fn run_ensemble_in_order(
    p: &ModelParams,
    n: &NoiseSpec,
    d: &DelaySpec,
    h: &HistorySpec,
    c: &StepConfig,
    opts: &EnsembleOptions,
    order: &[usize],
) -> Result<EnsembleStats, EnsembleError> {
    if opts.n_reps == 0 {
        return Err(EnsembleError::Config("n_reps must be at least 1".into()));
    }
    if opts.record_stride == 0 {
        return Err(EnsembleError::Config("record_stride must be at least 1".into()));
    }
    let mut seen = vec![false; opts.n_reps];
    for &k in order {
        if k >= opts.n_reps || std::mem::replace(&mut seen[k], true) {
            return Err(EnsembleError::Config(format!(
                "replicate order is not a permutation of 0..{}",
                opts.n_reps
            )));
        }
    }
    if order.len() != opts.n_reps {
        return Err(EnsembleError::Config(format!(
            "replicate order has {} entries, expected {}",
            order.len(),
            opts.n_reps
        )));
    }
    let cfg = c.with_seed(opts.base_seed);
    let finished: Vec<(usize, Result<ReplicateSummary, EnsembleError>)> = order
        .par_iter()
        .map(|&k| (k, run_replicate(p, n, d, h, &cfg, k, opts.record_stride)))
        .collect();
    let mut slots: Vec<Option<ReplicateSummary>> = vec![None; opts.n_reps];
    let mut first_error: Option<EnsembleError> = None;
    for (k, r) in finished {
        match r {
            Ok(s) => slots[k] = Some(s),
            Err(e) => {
                let earlier = match &first_error {
                    Some(EnsembleError::Replicate { index, .. }) => k < *index,
                    _ => true,
                };
                if earlier {
                    first_error = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let reps: Vec<ReplicateSummary> = slots.into_iter().map(|s| s.expect("every slot filled")).collect();
    let times: Vec<f64> = (0..reps[0].recorded.len())
        .map(|i| (i * opts.record_stride) as f64 * cfg.dt)
        .collect();
    Ok(aggregate(model::fingerprint(p, n, d), opts.base_seed, times, &reps))
}

/// Reduces replicate summaries in index order.
pub fn aggregate(
    fingerprint: u64,
    base_seed: u64,
    times: Vec<f64>,
    reps: &[ReplicateSummary],
) -> EnsembleStats {
    let len = times.len();
    let m = reps.len();
    let mut mean = Vec::with_capacity(len);
    let mut sd = Vec::with_capacity(len);
    let mut q025 = Vec::with_capacity(len);
    let mut q500 = Vec::with_capacity(len);
    let mut q975 = Vec::with_capacity(len);
    let mut column = vec![0.0; m];
    for g in 0..len {
        let mut mu = [0.0; 3];
        let mut s = [0.0; 3];
        let mut lo = [0.0; 3];
        let mut mid = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            let mut w_mean = 0.0;
            let mut w_m2 = 0.0;
            for (k, r) in reps.iter().enumerate() {
                let v = r.recorded[g].to_array()[i];
                column[k] = v;
                let delta = v - w_mean;
                w_mean += delta / (k + 1) as f64;
                w_m2 += delta * (v - w_mean);
            }
            column.sort_by(f64::total_cmp);
            mu[i] = w_mean.clamp(column[0], column[m - 1]);
            s[i] = if m > 1 { (w_m2 / (m - 1) as f64).max(0.0).sqrt() } else { 0.0 };
            lo[i] = quantile_sorted(&column, 0.025);
            mid[i] = quantile_sorted(&column, 0.5);
            hi[i] = quantile_sorted(&column, 0.975);
        }
        mean.push(mu);
        sd.push(s);
        q025.push(lo);
        q500.push(mid);
        q975.push(hi);
    }
    EnsembleStats {
        n_replicates: m,
        fingerprint,
        base_seed,
        times,
        mean,
        sd,
        q025,
        q500,
        q975,
        terminal_averages: reps.iter().map(|r| r.terminal_average).collect(),
        checksums: reps.iter().map(|r| r.checksum).collect(),
        floor_hits: reps.iter().map(|r| r.floor_hits).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSpec {
    /// Median terminal average below which a species counts as extinct.
    pub extinction: f64,
    /// Allowed relative shortfall against a persistence lower bound.
    pub slack: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            extinction: 0.05,
            slack: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    NotCheckable,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::NotCheckable => "not checkable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Below,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCheck {
    pub species: &'static str,
    pub median: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl fmt::Display for ComponentCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::Below => "<",
            Relation::AtLeast => ">=",
        };
        write!(
            f,
            "median <{}(T)> = {:.6e} {} {:.6e}: {}",
            self.species,
            self.median,
            rel,
            self.threshold,
            if self.passed { "ok" } else { "violated" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    pub regime: Regime,
    pub outcome: Outcome,
    pub medians: [f64; 3],
    pub checks: Vec<ComponentCheck>,
}

impl fmt::Display for VerificationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime {}: {}", self.regime, self.outcome)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

const SPECIES: [&str; 3] = ["x", "y", "z"];

pub fn verify_regime(
    stats: &EnsembleStats,
    report: &RegimeReport,
    tol: &ToleranceSpec,
) -> Result<VerificationOutcome, EnsembleError> {
    if stats.fingerprint != report.fingerprint {
        return Err(EnsembleError::Provenance {
            stats: stats.fingerprint,
            report: report.fingerprint,
        });
    }
    let medians = stats.median_terminal();
    let below = |i: usize| ComponentCheck {
        species: SPECIES[i],
        median: medians[i],
        relation: Relation::Below,
        threshold: tol.extinction,
        passed: medians[i] < tol.extinction,
    };
    let at_least = |i: usize, bound: f64| {
        let threshold = (1.0 - tol.slack) * bound;
        ComponentCheck {
            species: SPECIES[i],
            median: medians[i],
            relation: Relation::AtLeast,
            threshold,
            passed: medians[i] >= threshold,
        }
    };
    let checks = match report.predicted {
        Regime::ExtinctionAll => (0..3).map(below).collect(),
        Regime::PredatorExtinctPreyPersist => {
            let (lx, ly) = report
                .prey_bounds
                .expect("predator-extinction regime implies finite prey bounds");
            vec![at_least(0, lx), at_least(1, ly), below(2)]
        }
        Regime::AllPersist => {
            let b = report
                .persistence
                .expect("persistence regime implies finite bounds");
            vec![at_least(0, b.lx), at_least(1, b.ly), at_least(2, b.lz)]
        }
        Regime::Indeterminate => Vec::new(),
    };
    let outcome = if report.predicted == Regime::Indeterminate {
        Outcome::NotCheckable
    } else if checks.iter().all(|c| c.passed) {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(VerificationOutcome {
        regime: report.predicted,
        outcome,
        medians,
        checks,
    })
}
