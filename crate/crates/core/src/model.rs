//! Parameter types and the right-hand side of the stochastic delayed
//! two-prey/one-predator system.
//!
//! Two prey `x`, `y` grow logistically with delayed self-regulation and
//! cooperate against a predator `z`; the predator converts delayed prey into
//! recruitment. Each equation carries multiplicative Brownian noise
//! `sigma_i * S_i dW_i` and a compensated compound-Poisson jump term
//! `q_i * S_i(t-) (dN - lambda dt)`.

use std::fmt;

use thiserror::Error;

pub const SPECIES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite value in {component}: {value}")]
    NonFinite { component: &'static str, value: f64 },
    #[error("invalid parameter {name} = {value}: {rule}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        rule: &'static str,
    },
}

/// Biological rates of the deterministic core.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Intrinsic growth rate of prey x (1/day).
    pub r1: f64,
    /// Intrinsic growth rate of prey y (1/day).
    pub r2: f64,
    /// Carrying capacity of x.
    pub k1: f64,
    /// Carrying capacity of y.
    pub k2: f64,
    /// Predation rate on x.
    pub alpha1: f64,
    /// Predation rate on y.
    pub alpha2: f64,
    /// Intra-specific competition among predators.
    pub alpha3: f64,
    /// Cooperation of the two prey against the predator.
    pub beta: f64,
    /// Predator death rate.
    pub delta: f64,
    /// Conversion of delayed prey x into predators.
    pub a1: f64,
    /// Conversion of delayed prey y into predators.
    pub a2: f64,
}

impl ModelParams {
    /// Named view of every field, in declaration order.
    pub fn named(&self) -> [(&'static str, f64); 11] {
        [
            ("r1", self.r1),
            ("r2", self.r2),
            ("K1", self.k1),
            ("K2", self.k2),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
            ("beta", self.beta),
            ("delta", self.delta),
            ("a1", self.a1),
            ("a2", self.a2),
        ]
    }

    pub fn check(&self) -> Result<(), ModelError> {
        for (name, value) in self.named() {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    rule: "must be finite and >= 0",
                });
            }
        }
        for (name, value) in [("K1", self.k1), ("K2", self.k2)] {
            if value <= 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    rule: "carrying capacity must be > 0",
                });
            }
        }
        Ok(())
    }
}

/// Brownian intensities, jump marks and the jump arrival rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: [f64; 3],
    /// Relative jump size per species: a jump maps `S` to `S * (1 + q)`.
    pub q: [f64; 3],
    /// Total mass of the jump measure, i.e. expected arrivals per day.
    pub lambda: f64,
}

impl NoiseSpec {
    pub const DEFAULT_LAMBDA: f64 = 1.0;

    pub fn new(sigma: [f64; 3], q: [f64; 3], lambda: f64) -> Result<Self, ModelError> {
        let noise = Self { sigma, q, lambda };
        noise.check()?;
        Ok(noise)
    }

    /// No Brownian noise and no jumps.
    pub fn zero() -> Self {
        Self {
            sigma: [0.0; 3],
            q: [0.0; 3],
            lambda: 0.0,
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        const SIGMA: [&str; 3] = ["sigma1", "sigma2", "sigma3"];
        const Q: [&str; 3] = ["q1", "q2", "q3"];
        for i in 0..3 {
            let s = self.sigma[i];
            if !s.is_finite() || s < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name: SIGMA[i],
                    value: s,
                    rule: "must be finite and >= 0",
                });
            }
            let q = self.q[i];
            if !q.is_finite() || q <= -1.0 {
                return Err(ModelError::InvalidParameter {
                    name: Q[i],
                    value: q,
                    rule: "jump mark must be finite and > -1",
                });
            }
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "lambda",
                value: self.lambda,
                rule: "must be finite and >= 0",
            });
        }
        Ok(())
    }

    /// `q_i^2 * lambda`: the second jump moment under a single-mark jump measure.
    pub fn jump_second_moment(&self, species: usize) -> f64 {
        self.q[species] * self.q[species] * self.lambda
    }

    /// `(q_i - ln(1 + q_i)) * lambda`, always >= 0.
    pub fn jump_log_gap(&self, species: usize) -> f64 {
        let q = self.q[species];
        (q - q.ln_1p()) * self.lambda
    }
}

/// The three delays. `tau1` regulates x, `tau2` regulates y, `tau3` is the
/// predator's conversion lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySpec {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
}

impl DelaySpec {
    pub fn new(tau1: f64, tau2: f64, tau3: f64) -> Result<Self, ModelError> {
        let delays = Self { tau1, tau2, tau3 };
        delays.check()?;
        Ok(delays)
    }

    pub fn none() -> Self {
        Self {
            tau1: 0.0,
            tau2: 0.0,
            tau3: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.tau1, self.tau2, self.tau3]
    }

    pub fn tau_max(&self) -> f64 {
        self.tau1.max(self.tau2).max(self.tau3)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        const NAMES: [&str; 3] = ["tau1", "tau2", "tau3"];
        for (name, tau) in NAMES.into_iter().zip(self.as_array()) {
            if !tau.is_finite() || tau < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value: tau,
                    rule: "delay must be finite and >= 0",
                });
            }
        }
        Ok(())
    }
}

/// Population densities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl State {
    pub const ORIGIN: State = State {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            x: v[0],
            y: v[1],
            z: v[2],
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|v| *v >= 0.0)
    }

    fn check_finite(&self, components: [&'static str; 3]) -> Result<(), ModelError> {
        for (component, value) in components.into_iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { component, value });
            }
        }
        Ok(())
    }

    /// Linear interpolation `(1 - w) * self + w * other`.
    pub fn lerp(&self, other: &State, w: f64) -> State {
        State {
            x: self.x + w * (other.x - self.x),
            y: self.y + w * (other.y - self.y),
            z: self.z + w * (other.z - self.z),
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={}, y={}, z={})", self.x, self.y, self.z)
    }
}

/// One sample of a tabulated initial history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySample {
    pub t: f64,
    pub state: State,
}

/// Initial data on `[-tau_max, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySpec {
    Constant(State),
    /// Piecewise-linear through the samples; times strictly increasing.
    Table(Vec<HistorySample>),
}

/// Slack allowed when matching table endpoints against `-tau_max` and `0`.
const SPAN_EPS: f64 = 1e-9;

impl HistorySpec {
    pub fn constant(x: f64, y: f64, z: f64) -> Result<Self, ModelError> {
        let h = HistorySpec::Constant(State::new(x, y, z));
        h.check()?;
        Ok(h)
    }

    pub fn table(samples: Vec<HistorySample>) -> Result<Self, ModelError> {
        let h = HistorySpec::Table(samples);
        h.check()?;
        Ok(h)
    }

    /// Value at time zero, the initial state of the forward problem.
    pub fn initial_state(&self) -> State {
        match self {
            HistorySpec::Constant(s) => *s,
            HistorySpec::Table(samples) => samples.last().map(|s| s.state).unwrap_or_default(),
        }
    }

    pub fn check(&self) -> Result<(), ModelError> {
        let states: Vec<State> = match self {
            HistorySpec::Constant(s) => vec![*s],
            HistorySpec::Table(samples) => {
                if samples.is_empty() {
                    return Err(ModelError::InvalidParameter {
                        name: "history",
                        value: 0.0,
                        rule: "table needs at least one sample",
                    });
                }
                for w in samples.windows(2) {
                    if !(w[1].t > w[0].t) {
                        return Err(ModelError::InvalidParameter {
                            name: "history.t",
                            value: w[1].t,
                            rule: "table times must be strictly increasing",
                        });
                    }
                }
                samples.iter().map(|s| s.state).collect()
            }
        };
        for s in states {
            for (name, v) in ["x", "y", "z"].into_iter().zip(s.to_array()) {
                if !v.is_finite() || v < 0.0 {
                    return Err(ModelError::InvalidParameter {
                        name,
                        value: v,
                        rule: "history values must be finite and >= 0",
                    });
                }
            }
        }
        Ok(())
    }

    /// Whether the history is defined on all of `[-tau_max, 0]`.
    pub fn covers(&self, tau_max: f64) -> bool {
        match self {
            HistorySpec::Constant(_) => true,
            HistorySpec::Table(samples) => match (samples.first(), samples.last()) {
                (Some(first), Some(last)) => {
                    first.t <= -tau_max + SPAN_EPS && last.t >= -SPAN_EPS && last.t <= SPAN_EPS
                }
                _ => false,
            },
        }
    }

    /// Value at `t`, linear between table samples. `None` outside the table.
    pub fn eval(&self, t: f64) -> Option<State> {
        match self {
            HistorySpec::Constant(s) => Some(*s),
            HistorySpec::Table(samples) => {
                let first = samples.first()?;
                let last = samples.last()?;
                if t < first.t - SPAN_EPS || t > last.t + SPAN_EPS {
                    return None;
                }
                if t <= first.t {
                    return Some(first.state);
                }
                if t >= last.t {
                    return Some(last.state);
                }
                let hi = samples.partition_point(|s| s.t <= t);
                let (a, b) = (&samples[hi - 1], &samples[hi]);
                if t == a.t {
                    return Some(a.state);
                }
                Some(a.state.lerp(&b.state, (t - a.t) / (b.t - a.t)))
            }
        }
    }
}

/// Delayed taps entering the drift.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayedState {
    /// x(t - tau1)
    pub x_tau1: f64,
    /// y(t - tau2)
    pub y_tau2: f64,
    /// x(t - tau3)
    pub x_tau3: f64,
    /// y(t - tau3)
    pub y_tau3: f64,
}

impl DelayedState {
    /// Taps for a state and its lagged copies at tau1, tau2, tau3.
    pub fn from_lagged(at_tau1: &State, at_tau2: &State, at_tau3: &State) -> Self {
        Self {
            x_tau1: at_tau1.x,
            y_tau2: at_tau2.y,
            x_tau3: at_tau3.x,
            y_tau3: at_tau3.y,
        }
    }

    /// Taps of an undelayed system.
    pub fn undelayed(s: &State) -> Self {
        Self::from_lagged(s, s, s)
    }

    fn check_finite(&self) -> Result<(), ModelError> {
        let taps = [
            ("x(t-tau1)", self.x_tau1),
            ("y(t-tau2)", self.y_tau2),
            ("x(t-tau3)", self.x_tau3),
            ("y(t-tau3)", self.y_tau3),
        ];
        for (component, value) in taps {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { component, value });
            }
        }
        Ok(())
    }
}

/// Deterministic rate `(fx, fy, fz)`.
pub fn drift(state: &State, delayed: &DelayedState, p: &ModelParams) -> Result<[f64; 3], ModelError> {
    state.check_finite(["x", "y", "z"])?;
    delayed.check_finite()?;
    Ok(drift_unchecked(state, delayed, p))
}

#[inline]
pub(crate) fn drift_unchecked(s: &State, d: &DelayedState, p: &ModelParams) -> [f64; 3] {
    let State { x, y, z } = *s;
    let mutualism = p.beta * x * y * z;
    let fx = p.r1 * x * (1.0 - d.x_tau1 / p.k1) - p.alpha1 * x * z + mutualism;
    let fy = p.r2 * y * (1.0 - d.y_tau2 / p.k2) - p.alpha2 * y * z + mutualism;
    let fz = -p.delta * z - p.alpha3 * z * z + p.a1 * d.x_tau3 * z + p.a2 * d.y_tau3 * z;
    [fx, fy, fz]
}

/// Brownian scale `(sigma1 x, sigma2 y, sigma3 z)`.
pub fn diffusion(state: &State, n: &NoiseSpec) -> Result<[f64; 3], ModelError> {
    state.check_finite(["x", "y", "z"])?;
    let s = state.to_array();
    Ok([n.sigma[0] * s[0], n.sigma[1] * s[1], n.sigma[2] * s[2]])
}

/// Subset of the three species hit by a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct SpeciesSet(u8);

impl SpeciesSet {
    pub const NONE: SpeciesSet = SpeciesSet(0);
    pub const ALL: SpeciesSet = SpeciesSet(0b111);

    pub fn from_flags(flags: [bool; 3]) -> Self {
        let mut bits = 0;
        for (i, on) in flags.into_iter().enumerate() {
            if on {
                bits |= 1 << i;
            }
        }
        SpeciesSet(bits)
    }

    pub fn contains(&self, species: usize) -> bool {
        species < 3 && self.0 & (1 << species) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for SpeciesSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = (0..3)
            .filter(|i| self.contains(*i))
            .map(|i| SPECIES[i])
            .collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Action of one jump atom: every species in `which` is scaled by `1 + q_i`.
pub fn apply_jump(state: &State, which: SpeciesSet, n: &NoiseSpec) -> State {
    let mut s = state.to_array();
    for (i, v) in s.iter_mut().enumerate() {
        if which.contains(i) {
            *v *= 1.0 + n.q[i];
        }
    }
    State::from_array(s)
}

/// Stable 64-bit digest of a parameter set (FNV-1a over the IEEE bit
/// patterns). Used to tie derived artifacts back to their inputs.
pub fn fingerprint(p: &ModelParams, n: &NoiseSpec, d: &DelaySpec) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let values = p
        .named()
        .map(|(_, v)| v)
        .into_iter()
        .chain(n.sigma)
        .chain(n.q)
        .chain([n.lambda])
        .chain(d.as_array());
    let mut h = OFFSET;
    for v in values {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Checks whose failure makes integration meaningless (everything except
    /// the global-existence hypothesis).
    pub fn structural_ok(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| c.name != EXISTENCE_CHECK)
            .all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            writeln!(f, "[{mark}] {}: {}", c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Name of the global-existence hypothesis check (`delta > alpha3`).
pub const EXISTENCE_CHECK: &str = "delta > alpha3";

pub fn validate(p: &ModelParams, n: &NoiseSpec, d: &DelaySpec) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, detail: String| {
        checks.push(Check {
            name,
            passed,
            detail,
        })
    };

    push(
        EXISTENCE_CHECK.to_string(),
        p.delta > p.alpha3,
        format!(
            "delta = {}, alpha3 = {}{}",
            p.delta,
            p.alpha3,
            if p.delta > p.alpha3 {
                ""
            } else {
                " (global positive solution hypothesis unmet)"
            }
        ),
    );
    for (name, value) in p.named() {
        push(
            format!("{name} >= 0"),
            value.is_finite() && value >= 0.0,
            format!("{name} = {value}"),
        );
    }
    for (name, value) in [("K1", p.k1), ("K2", p.k2)] {
        push(format!("{name} > 0"), value > 0.0, format!("{name} = {value}"));
    }
    for i in 0..3 {
        let s = n.sigma[i];
        push(
            format!("sigma{} >= 0", i + 1),
            s.is_finite() && s >= 0.0,
            format!("sigma{} = {s}", i + 1),
        );
    }
    for i in 0..3 {
        let q = n.q[i];
        push(
            format!("q{} > -1", i + 1),
            q.is_finite() && q > -1.0,
            format!("q{} = {q}", i + 1),
        );
    }
    push(
        "lambda >= 0".to_string(),
        n.lambda.is_finite() && n.lambda >= 0.0,
        format!("lambda = {}", n.lambda),
    );
    for (i, tau) in d.as_array().into_iter().enumerate() {
        push(
            format!("tau{} >= 0", i + 1),
            tau.is_finite() && tau >= 0.0,
            format!("tau{} = {tau}", i + 1),
        );
    }
    ValidationReport { checks }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Figure-1 column of the simulation table with a1 = a2 = 0.05.
    pub(crate) fn fig1_params() -> ModelParams {
        ModelParams {
            r1: 0.7,
            r2: 0.65,
            k1: 100.0,
            k2: 100.0,
            alpha1: 0.3,
            alpha2: 0.35,
            alpha3: 0.5,
            beta: 1e-4,
            delta: 0.1,
            a1: 0.05,
            a2: 0.05,
        }
    }

    pub(crate) fn fig1_noise() -> NoiseSpec {
        NoiseSpec::new([1e-4, 2e-4, 2e-4], [-0.04, -0.006, -0.008], 1.0).unwrap()
    }

    #[test]
    fn drift_vanishes_at_origin() {
        let p = fig1_params();
        let d = DelayedState {
            x_tau1: 3.0,
            y_tau2: 7.0,
            x_tau3: 11.0,
            y_tau3: 13.0,
        };
        assert_eq!(drift(&State::ORIGIN, &d, &p).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn drift_vanishes_at_prey_capacity_without_predator() {
        let mut p = fig1_params();
        p.beta = 12.5;
        let s = State::new(p.k1, 0.0, 0.0);
        let d = DelayedState {
            x_tau1: p.k1,
            ..Default::default()
        };
        assert_eq!(drift(&s, &d, &p).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn drift_hand_evaluation() {
        // fx = 0.7*50*0.5 - 0.3*50*10 + 1e-4*50*50*10
        // fy = 0.65*50*0.5 - 0.35*50*10 + 2.5
        // fz = -0.1*10 - 0.5*100 + 0.05*50*10 + 0.05*50*10
        let f = drift(
            &State::new(50.0, 50.0, 10.0),
            &DelayedState {
                x_tau1: 50.0,
                y_tau2: 50.0,
                x_tau3: 50.0,
                y_tau3: 50.0,
            },
            &fig1_params(),
        )
        .unwrap();
        assert_relative_eq!(f[0], -130.0, max_relative = 1e-14);
        assert_relative_eq!(f[1], -156.25, max_relative = 1e-14);
        assert_relative_eq!(f[2], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn drift_rejects_non_finite_with_component_name() {
        let err = drift(
            &State::new(1.0, f64::NAN, 1.0),
            &DelayedState::default(),
            &fig1_params(),
        )
        .unwrap_err();
        assert_eq!(
            err.to_string().split(':').next().unwrap(),
            "non-finite value in y"
        );
        let err = drift(
            &State::new(1.0, 1.0, 1.0),
            &DelayedState {
                x_tau3: f64::INFINITY,
                ..Default::default()
            },
            &fig1_params(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ModelError::NonFinite {
                component: "x(t-tau3)",
                ..
            }
        ));
    }

    #[test]
    fn diffusion_examples() {
        let n = NoiseSpec::new([0.1, 0.2, 0.3], [0.0; 3], 0.0).unwrap();
        assert_eq!(diffusion(&State::ORIGIN, &n).unwrap(), [0.0; 3]);
        let d = diffusion(&State::new(10.0, 10.0, 10.0), &n).unwrap();
        assert_relative_eq!(d[0], 1.0);
        assert_relative_eq!(d[1], 2.0);
        assert_relative_eq!(d[2], 3.0, max_relative = 1e-15);
        let d = diffusion(&State::new(50.0, 50.0, 10.0), &fig1_noise()).unwrap();
        assert_relative_eq!(d[0], 5e-3, max_relative = 1e-14);
        assert_relative_eq!(d[1], 1e-2, max_relative = 1e-14);
        assert_relative_eq!(d[2], 2e-3, max_relative = 1e-14);
    }

    #[test]
    fn jump_examples() {
        let n = fig1_noise();
        let s = apply_jump(&State::new(10.0, 10.0, 10.0), SpeciesSet::ALL, &n);
        assert_relative_eq!(s.x, 9.6, max_relative = 1e-15);
        assert_relative_eq!(s.y, 9.94, max_relative = 1e-15);
        assert_relative_eq!(s.z, 9.92, max_relative = 1e-15);
        let s0 = State::new(10.0, 10.0, 10.0);
        assert_eq!(apply_jump(&s0, SpeciesSet::NONE, &n), s0);
        let s = apply_jump(&State::new(0.0, 5.0, 5.0), SpeciesSet::ALL, &n);
        assert_eq!(s, State::new(0.0, 5.0 * (1.0 - 0.006), 5.0 * (1.0 - 0.008)));
    }

    #[test]
    fn noise_rejects_mark_at_or_below_minus_one() {
        assert!(NoiseSpec::new([0.0; 3], [-1.0, 0.0, 0.0], 1.0).is_err());
        let err = NoiseSpec::new([0.0; 3], [0.0, 0.0, -1.5], 1.0).unwrap_err();
        assert!(err.to_string().contains("q3"));
        assert!(NoiseSpec::new([0.0; 3], [0.0; 3], -1.0).is_err());
    }

    #[test]
    fn validate_examples() {
        let r = validate(&fig1_params(), &fig1_noise(), &DelaySpec::new(0.5, 1.0, 1.5).unwrap());
        assert!(!r.find(EXISTENCE_CHECK).unwrap().passed);
        assert!(!r.passed());
        assert!(r.structural_ok());

        let mut p = fig1_params();
        p.delta = 0.6;
        let r = validate(&p, &fig1_noise(), &DelaySpec::new(0.5, 1.0, 1.5).unwrap());
        assert!(r.passed(), "{r}");

        let mut n = fig1_noise();
        n.q[0] = -1.5;
        let r = validate(&p, &n, &DelaySpec::none());
        let failed: Vec<_> = r.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["q1 > -1"]);
    }

    #[test]
    fn tau_max_is_largest_delay() {
        let d = DelaySpec::new(0.5, 2.0, 1.5).unwrap();
        assert_eq!(d.tau_max(), 2.0);
        assert!(DelaySpec::new(-0.1, 0.0, 0.0).is_err());
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (
            prop::array::uniform11(0.0f64..5.0),
            (0.1f64..200.0, 0.1f64..200.0),
        )
            .prop_map(|(v, (k1, k2))| ModelParams {
                r1: v[0],
                r2: v[1],
                k1,
                k2,
                alpha1: v[2],
                alpha2: v[3],
                alpha3: v[4],
                beta: v[5] * 1e-3,
                delta: v[6],
                a1: v[7],
                a2: v[8],
            })
    }

    fn arb_state() -> impl Strategy<Value = State> {
        (0.0f64..200.0, 0.0f64..200.0, 0.0f64..200.0).prop_map(|(x, y, z)| State::new(x, y, z))
    }

    proptest! {
        #[test]
        fn drift_is_pure_and_predator_free_rate_is_zero(
            p in arb_params(), s in arb_state(), lag in arb_state(),
        ) {
            let d = DelayedState::from_lagged(&lag, &lag, &lag);
            let first = drift(&s, &d, &p).unwrap();
            let second = drift(&s, &d, &p).unwrap();
            prop_assert_eq!(first, second);
            let no_predator = State { z: 0.0, ..s };
            prop_assert_eq!(drift(&no_predator, &d, &p).unwrap()[2], 0.0);
        }

        #[test]
        fn jumps_preserve_strict_positivity(
            s in (1e-9f64..1e3, 1e-9f64..1e3, 1e-9f64..1e3),
            q in prop::array::uniform3(-0.999f64..5.0),
            flags in prop::array::uniform3(any::<bool>()),
        ) {
            let n = NoiseSpec::new([0.0; 3], q, 1.0).unwrap();
            let out = apply_jump(&State::new(s.0, s.1, s.2), SpeciesSet::from_flags(flags), &n);
            prop_assert!(out.x > 0.0 && out.y > 0.0 && out.z > 0.0);
        }

        #[test]
        fn validate_passes_iff_every_check_passes(
            p in arb_params(),
            q in prop::array::uniform3(-2.0f64..1.0),
            tau in prop::array::uniform3(-0.5f64..2.0),
        ) {
            let n = NoiseSpec { sigma: [0.1; 3], q, lambda: 1.0 };
            let d = DelaySpec { tau1: tau[0], tau2: tau[1], tau3: tau[2] };
            let report = validate(&p, &n, &d);
            let expected = p.delta > p.alpha3
                && q.iter().all(|v| *v > -1.0)
                && tau.iter().all(|v| *v >= 0.0);
            prop_assert_eq!(report.passed(), expected);
            prop_assert_eq!(report.passed(), report.checks.iter().all(|c| c.passed));
        }
    }
}
