//! Closed-form regime criteria and running time averages.
//!
//! Every criterion is a sufficient condition on the parameters alone:
//!
//! * extinction of all species when `max(c1, c2, c3) < 0`;
//! * predator extinction with prey persistence when
//!   `min(c1, c2, D1, D2) > 0` and `c4 <= 0`;
//! * persistence of all species when the lower bounds `Lx`, `Ly` and the
//!   numerator of `Lz` are positive and `min(D1, D2) > 0`;
//!
//! with `c_i = r_i - sigma_i^2 / 2` and `D_i = 1 - r_i + 2 r_i / K_i`.
//! Jump integrals reduce to `q_i^2 lambda` under the single-mark jump measure.

use std::fmt;

use thiserror::Error;

use crate::engine::Trajectory;
use crate::model::{self, DelaySpec, ModelParams, NoiseSpec, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("{quantity} is undefined: {reason}")]
    Undefined {
        quantity: &'static str,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ExtinctionCoefficients {
    pub fn max(&self) -> f64 {
        self.c1.max(self.c2).max(self.c3)
    }

    pub fn hypothesis_holds(&self) -> bool {
        self.max() < 0.0
    }
}

/// Net prey growth rates `r_i - sigma_i^2 / 2`.
pub fn prey_growth_coefficients(p: &ModelParams, n: &NoiseSpec) -> (f64, f64) {
    (
        p.r1 - n.sigma[0] * n.sigma[0] / 2.0,
        p.r2 - n.sigma[1] * n.sigma[1] / 2.0,
    )
}

pub fn extinction_coefficients(
    p: &ModelParams,
    n: &NoiseSpec,
) -> Result<ExtinctionCoefficients, AnalysisError> {
    for (name, r) in [("r1", p.r1), ("r2", p.r2)] {
        if r == 0.0 {
            return Err(AnalysisError::Undefined {
                quantity: "c3",
                reason: format!("{name} = 0 appears in a denominator"),
            });
        }
    }
    let (c1, c2) = prey_growth_coefficients(p, n);
    let c3 = p.a1 * (p.k1 / p.r1) * c1 + p.a2 * (p.k2 / p.r2) * c2
        - p.delta
        - n.sigma[2] * n.sigma[2] / 2.0;
    Ok(ExtinctionCoefficients { c1, c2, c3 })
}

/// Denominators `1 - r_i + 2 r_i / K_i` of the prey lower bounds.
pub fn persistence_denominators(p: &ModelParams) -> (f64, f64) {
    (
        1.0 - p.r1 + 2.0 * p.r1 / p.k1,
        1.0 - p.r2 + 2.0 * p.r2 / p.k2,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredatorExtinction {
    pub c4: f64,
    /// `min(c1, c2, D1, D2)`.
    pub min_condition: f64,
    pub hypothesis_holds: bool,
}

pub fn predator_extinction_report(p: &ModelParams, n: &NoiseSpec) -> PredatorExtinction {
    let (c1, c2) = prey_growth_coefficients(p, n);
    let (d1, d2) = persistence_denominators(p);
    let c4 = p.a1 * p.k1 + p.a2 * p.k2 - p.delta - n.sigma[2] * n.sigma[2] / 2.0;
    let min_condition = c1.min(c2).min(d1).min(d2);
    PredatorExtinction {
        c4,
        min_condition,
        hypothesis_holds: min_condition > 0.0 && c4 <= 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PersistenceBounds {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    /// `a1 Lx + a2 Ly - delta - sigma3^2 / 2`, i.e. `alpha3 * Lz`.
    pub lz_numerator: f64,
    pub hypothesis_ok: bool,
}

/// Asymptotic lower bounds on the prey time averages, shared by the
/// predator-extinction and full-persistence criteria.
pub fn prey_lower_bounds(p: &ModelParams, n: &NoiseSpec) -> Result<(f64, f64), AnalysisError> {
    let (c1, c2) = prey_growth_coefficients(p, n);
    let (d1, d2) = persistence_denominators(p);
    if d1 == 0.0 {
        return Err(AnalysisError::Undefined {
            quantity: "Lx",
            reason: "1 - r1 + 2 r1 / K1 = 0".to_string(),
        });
    }
    if d2 == 0.0 {
        return Err(AnalysisError::Undefined {
            quantity: "Ly",
            reason: "1 - r2 + 2 r2 / K2 = 0".to_string(),
        });
    }
    Ok((c1 / d1, c2 / d2))
}

pub fn persistence_report(
    p: &ModelParams,
    n: &NoiseSpec,
) -> Result<PersistenceBounds, AnalysisError> {
    let (lx, ly) = prey_lower_bounds(p, n)?;
    if p.alpha3 == 0.0 {
        return Err(AnalysisError::Undefined {
            quantity: "Lz",
            reason: "alpha3 = 0 appears in the denominator".to_string(),
        });
    }
    let (d1, d2) = persistence_denominators(p);
    let lz_numerator = p.a1 * lx + p.a2 * ly - p.delta - n.sigma[2] * n.sigma[2] / 2.0;
    let lz = lz_numerator / p.alpha3;
    let hypothesis_ok =
        lx > 0.0 && ly > 0.0 && lz_numerator > 0.0 && p.alpha3 > 0.0 && d1.min(d2) > 0.0;
    Ok(PersistenceBounds {
        lx,
        ly,
        lz,
        lz_numerator,
        hypothesis_ok,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundedness {
    pub b: [f64; 3],
    pub all_negative: bool,
}

pub fn boundedness_check(p: &ModelParams, n: &NoiseSpec) -> Boundedness {
    let s2 = n.sigma.map(|s| s * s);
    let b1 = s2[0] + n.jump_second_moment(0) + 2.0 * p.r1 + p.beta * p.k2 - p.alpha1 * p.k1;
    let b2 = s2[1] + n.jump_second_moment(1) + 2.0 * p.r2 + p.beta * p.k1 - p.alpha2 * p.k2;
    let b3 = s2[2] + n.jump_second_moment(2) + 2.0 * p.a1 * p.k1 + 2.0 * p.a2 * p.k2
        - p.delta
        - p.alpha1 * p.k1
        - p.alpha2 * p.k2;
    let b = [b1, b2, b3];
    Boundedness {
        b,
        all_negative: b.iter().all(|v| *v < 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    ExtinctionAll,
    PredatorExtinctPreyPersist,
    AllPersist,
    Indeterminate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::ExtinctionAll => "ExtinctionAll",
            Regime::PredatorExtinctPreyPersist => "PredatorExtinctPreyPersist",
            Regime::AllPersist => "AllPersist",
            Regime::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

/// One evaluated inequality or quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub label: String,
    pub value: Option<f64>,
    pub holds: Option<bool>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub fingerprint: u64,
    pub c1: f64,
    pub c2: f64,
    /// `None` when `r1` or `r2` is zero.
    pub c3: Option<f64>,
    pub c4: f64,
    pub predator_min_condition: f64,
    /// `(Lx, Ly)`, defined whenever both denominators are nonzero.
    pub prey_bounds: Option<(f64, f64)>,
    pub persistence: Option<PersistenceBounds>,
    pub boundedness: Boundedness,
    pub existence_ok: bool,
    pub extinction_holds: bool,
    pub predator_extinction_holds: bool,
    pub persistence_holds: bool,
    pub overlap: bool,
    pub predicted: Regime,
    pub trace: Vec<TraceEntry>,
}

impl RegimeReport {
    /// Lower bounds `(Lx, Ly, Lz)` relevant to the predicted regime.
    pub fn bounds(&self) -> Option<[f64; 3]> {
        self.persistence.map(|b| [b.lx, b.ly, b.lz])
    }
}

fn entry(label: impl Into<String>, value: Option<f64>, holds: Option<bool>, note: impl Into<String>) -> TraceEntry {
    TraceEntry {
        label: label.into(),
        value,
        holds,
        note: note.into(),
    }
}

/// Evaluates every criterion and predicts a regime. Never fails: undefined
/// quantities become trace entries.
pub fn classify(p: &ModelParams, n: &NoiseSpec, d: &DelaySpec) -> RegimeReport {
    let mut trace = Vec::new();

    let validation = model::validate(p, n, d);
    for c in validation.failures().filter(|c| c.name != model::EXISTENCE_CHECK) {
        trace.push(entry(
            format!("validity: {}", c.name),
            None,
            Some(false),
            c.detail.clone(),
        ));
    }

    let existence_ok = p.delta > p.alpha3;
    trace.push(entry(
        "existence: delta > alpha3",
        Some(p.delta - p.alpha3),
        Some(existence_ok),
        if existence_ok {
            "global positive solution hypothesis met"
        } else {
            "global positive solution hypothesis unmet (informational; does not gate the regime)"
        },
    ));

    let boundedness = boundedness_check(p, n);
    for (i, b) in boundedness.b.iter().enumerate() {
        trace.push(entry(
            format!("boundedness: B{} < 0", i + 1),
            Some(*b),
            Some(*b < 0.0),
            "",
        ));
    }

    let (c1, c2) = prey_growth_coefficients(p, n);
    trace.push(entry("extinction: c1 = r1 - sigma1^2/2", Some(c1), None, ""));
    trace.push(entry("extinction: c2 = r2 - sigma2^2/2", Some(c2), None, ""));
    let (c3, extinction_holds) = match extinction_coefficients(p, n) {
        Ok(ec) => {
            trace.push(entry(
                "extinction: c3 = a1 K1 c1 / r1 + a2 K2 c2 / r2 - delta - sigma3^2/2",
                Some(ec.c3),
                None,
                "",
            ));
            trace.push(entry(
                "extinction: max(c1, c2, c3) < 0",
                Some(ec.max()),
                Some(ec.hypothesis_holds()),
                "",
            ));
            (Some(ec.c3), ec.hypothesis_holds())
        }
        Err(e) => {
            trace.push(entry("extinction: c3", None, Some(false), e.to_string()));
            (None, false)
        }
    };

    let pe = predator_extinction_report(p, n);
    let (d1, d2) = persistence_denominators(p);
    trace.push(entry(
        "predator extinction: c4 = a1 K1 + a2 K2 - delta - sigma3^2/2 <= 0",
        Some(pe.c4),
        Some(pe.c4 <= 0.0),
        "",
    ));
    trace.push(entry("predator extinction: D1 = 1 - r1 + 2 r1/K1 > 0", Some(d1), Some(d1 > 0.0), ""));
    trace.push(entry("predator extinction: D2 = 1 - r2 + 2 r2/K2 > 0", Some(d2), Some(d2 > 0.0), ""));
    trace.push(entry(
        "predator extinction: min(c1, c2, D1, D2) > 0",
        Some(pe.min_condition),
        Some(pe.min_condition > 0.0),
        "",
    ));
    trace.push(entry(
        "predator extinction: hypothesis",
        None,
        Some(pe.hypothesis_holds),
        "",
    ));

    let prey_bounds = match prey_lower_bounds(p, n) {
        Ok(b) => Some(b),
        Err(e) => {
            trace.push(entry("prey lower bounds", None, Some(false), e.to_string()));
            None
        }
    };

    let persistence = match persistence_report(p, n) {
        Ok(b) => {
            trace.push(entry("persistence: Lx = c1 / D1 > 0", Some(b.lx), Some(b.lx > 0.0), ""));
            trace.push(entry("persistence: Ly = c2 / D2 > 0", Some(b.ly), Some(b.ly > 0.0), ""));
            trace.push(entry(
                "persistence: a1 Lx + a2 Ly - delta - sigma3^2/2 > 0",
                Some(b.lz_numerator),
                Some(b.lz_numerator > 0.0),
                "",
            ));
            trace.push(entry("persistence: Lz = numerator / alpha3", Some(b.lz), None, ""));
            trace.push(entry("persistence: alpha3 > 0", Some(p.alpha3), Some(p.alpha3 > 0.0), ""));
            trace.push(entry(
                "persistence: min(D1, D2) > 0",
                Some(d1.min(d2)),
                Some(d1.min(d2) > 0.0),
                "",
            ));
            trace.push(entry("persistence: hypothesis", None, Some(b.hypothesis_ok), ""));
            Some(b)
        }
        Err(e) => {
            trace.push(entry("persistence: hypothesis", None, Some(false), e.to_string()));
            None
        }
    };
    let persistence_holds = persistence.is_some_and(|b| b.hypothesis_ok);

    let holding = [extinction_holds, persistence_holds, pe.hypothesis_holds]
        .iter()
        .filter(|h| **h)
        .count();
    let overlap = holding > 1;
    let predicted = if extinction_holds {
        Regime::ExtinctionAll
    } else if persistence_holds {
        Regime::AllPersist
    } else if pe.hypothesis_holds {
        Regime::PredatorExtinctPreyPersist
    } else {
        Regime::Indeterminate
    };
    if overlap {
        trace.push(entry(
            "regime overlap",
            None,
            None,
            format!("{holding} criteria hold; precedence ExtinctionAll > AllPersist > PredatorExtinctPreyPersist selects {predicted}"),
        ));
    }

    RegimeReport {
        fingerprint: model::fingerprint(p, n, d),
        c1,
        c2,
        c3,
        c4: pe.c4,
        predator_min_condition: pe.min_condition,
        prey_bounds,
        persistence,
        boundedness,
        existence_ok,
        extinction_holds,
        predator_extinction_holds: pe.hypothesis_holds,
        persistence_holds,
        overlap,
        predicted,
        trace,
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "predicted regime: {}", self.predicted)?;
        writeln!(f, "c1 = {:.17e}", self.c1)?;
        writeln!(f, "c2 = {:.17e}", self.c2)?;
        match self.c3 {
            Some(c3) => writeln!(f, "c3 = {c3:.17e}")?,
            None => writeln!(f, "c3 = undefined")?,
        }
        writeln!(f, "c4 = {:.17e}", self.c4)?;
        if let Some(b) = self.persistence {
            writeln!(f, "Lx = {:.17e}, Ly = {:.17e}, Lz = {:.17e}", b.lx, b.ly, b.lz)?;
        }
        let [b1, b2, b3] = self.boundedness.b;
        writeln!(f, "B1 = {b1:.17e}, B2 = {b2:.17e}, B3 = {b3:.17e}")?;
        writeln!(f, "trace:")?;
        for e in &self.trace {
            let mark = match e.holds {
                Some(true) => "holds ",
                Some(false) => "fails ",
                None => "      ",
            };
            write!(f, "  [{mark}] {}", e.label)?;
            if let Some(v) = e.value {
                write!(f, " = {v:.17e}")?;
            }
            if !e.note.is_empty() {
                write!(f, "  ({})", e.note)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Running means `<S(t)> = (1/t) * integral_0^t S(s) ds` on a trajectory grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverageSeries {
    pub times: Vec<f64>,
    pub averages: Vec<[f64; 3]>,
}

impl TimeAverageSeries {
    pub fn terminal(&self) -> Option<[f64; 3]> {
        self.averages.last().copied()
    }
}

/// Streaming trapezoidal running average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningAverage {
    t0: f64,
    last_t: f64,
    last: [f64; 3],
    integral: [f64; 3],
    lo: [f64; 3],
    hi: [f64; 3],
}

impl RunningAverage {
    pub fn new(t0: f64, s: &State) -> Self {
        let v = s.to_array();
        Self {
            t0,
            last_t: t0,
            last: v,
            integral: [0.0; 3],
            lo: v,
            hi: v,
        }
    }

    pub fn push(&mut self, t: f64, s: &State) {
        let v = s.to_array();
        let h = t - self.last_t;
        for i in 0..3 {
            self.integral[i] += 0.5 * h * (self.last[i] + v[i]);
            self.lo[i] = self.lo[i].min(v[i]);
            self.hi[i] = self.hi[i].max(v[i]);
        }
        self.last_t = t;
        self.last = v;
    }

    pub fn value(&self) -> [f64; 3] {
        let span = self.last_t - self.t0;
        if span <= 0.0 {
            return self.last;
        }
        // Rounding can push the quotient a few ulps outside the sample range.
        std::array::from_fn(|i| (self.integral[i] / span).clamp(self.lo[i], self.hi[i]))
    }
}

pub fn time_average(traj: &Trajectory) -> TimeAverageSeries {
    let mut times = Vec::with_capacity(traj.len());
    let mut averages = Vec::with_capacity(traj.len());
    let mut iter = traj.times.iter().zip(&traj.states);
    let Some((t0, s0)) = iter.next() else {
        return TimeAverageSeries { times, averages };
    };
    let mut acc = RunningAverage::new(*t0, s0);
    times.push(*t0);
    averages.push(acc.value());
    for (t, s) in iter {
        acc.push(*t, s);
        times.push(*t);
        averages.push(acc.value());
    }
    TimeAverageSeries { times, averages }
}
