//! Euler–Maruyama integration of the delayed jump-diffusion system.
//!
//! One step advances every species by
//!
//! ```text
//! S_i' = S_i + f_i dt + sigma_i S_i sqrt(dt) Z_i + q_i S_i (dN_i - lambda dt)
//! ```
//!
//! where `f` is the delayed drift, `Z_i` are independent standard normals and
//! `dN_i` the Poisson arrivals during the step (one shared clock by default).
//! Delayed taps come from a ring buffer aligned with the time grid.

use std::collections::VecDeque;

use log::warn;
use thiserror::Error;

use crate::model::{
    self, DelaySpec, DelayedState, HistorySpec, ModelError, ModelParams, NoiseSpec, SpeciesSet,
    State,
};
use crate::rng::RngStreams;

/// Relative slack used when deciding that a time sits on the grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid step configuration: {0}")]
    Config(String),
    #[error("initial history does not span [-{tau_max}, 0]")]
    HistorySpan { tau_max: f64 },
    #[error("history lookup at t = {requested} outside buffered range [{earliest}, {latest}]")]
    Lookup {
        requested: f64,
        earliest: f64,
        latest: f64,
    },
    #[error(
        "non-finite state at t = {time}: previous state {previous}, normals {normals:?}, \
         jump counts {arrivals:?}"
    )]
    NonFinite {
        time: f64,
        previous: State,
        normals: [f64; 3],
        arrivals: [u32; 3],
    },
}

/// Whether the three species share jump times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JumpClock {
    /// One Poisson clock drives every species.
    #[default]
    Shared,
    /// Each species has its own clock of rate `lambda`.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub positivity_floor: f64,
    pub jump_clock: JumpClock,
}

impl StepConfig {
    pub const DEFAULT_FLOOR: f64 = 1e-12;

    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        Self {
            dt,
            t_end,
            seed,
            positivity_floor: Self::DEFAULT_FLOOR,
            jump_clock: JumpClock::Shared,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    /// Number of steps; the last grid time is `n_steps * dt >= t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - GRID_EPS).ceil().max(0.0) as usize
    }

    pub fn check(&self, d: &DelaySpec) -> Result<(), EngineError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(EngineError::Config(format!("dt = {} must be > 0", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(EngineError::Config(format!(
                "t_end = {} must be > 0",
                self.t_end
            )));
        }
        if !(self.positivity_floor.is_finite() && self.positivity_floor > 0.0) {
            return Err(EngineError::Config(format!(
                "positivity_floor = {} must be > 0",
                self.positivity_floor
            )));
        }
        let min_positive = d
            .as_array()
            .into_iter()
            .filter(|t| *t > 0.0)
            .fold(f64::INFINITY, f64::min);
        if self.dt > min_positive * (1.0 + GRID_EPS) {
            return Err(EngineError::Config(format!(
                "dt = {} exceeds the smallest positive delay {min_positive}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Delays expressed in whole steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDelays {
    pub steps: [usize; 3],
    pub dt: f64,
}

impl GridDelays {
    /// Snaps each delay to the nearest multiple of `dt`, warning when that
    /// moves it.
    pub fn snap(d: &DelaySpec, dt: f64) -> Self {
        let names = ["tau1", "tau2", "tau3"];
        let mut steps = [0usize; 3];
        for (i, tau) in d.as_array().into_iter().enumerate() {
            let k = (tau / dt).round();
            if (k * dt - tau).abs() > GRID_EPS * tau.max(1.0) {
                warn!(
                    "{} = {tau} is not a multiple of dt = {dt}; snapped to {}",
                    names[i],
                    k * dt
                );
            }
            steps[i] = k as usize;
        }
        Self { steps, dt }
    }

    pub fn max_steps(&self) -> usize {
        self.steps.into_iter().max().unwrap_or(0)
    }

    pub fn taus(&self) -> [f64; 3] {
        self.steps.map(|k| k as f64 * self.dt)
    }

    pub fn as_delays(&self) -> DelaySpec {
        let [tau1, tau2, tau3] = self.taus();
        DelaySpec { tau1, tau2, tau3 }
    }
}

/// Grid-aligned window of past states covering `[t_now - tau_max, t_now]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    dt: f64,
    /// Grid index (time / dt) of the oldest retained sample.
    first_index: i64,
    states: VecDeque<State>,
    capacity: usize,
}

impl HistoryBuffer {
    /// Fills every grid point of `[-tau_max, 0]` from the initial history.
    pub fn init(h: &HistorySpec, d: &DelaySpec, c: &StepConfig) -> Result<Self, EngineError> {
        h.check()?;
        let lags = GridDelays::snap(d, c.dt);
        let span = lags.max_steps();
        let tau_max = span as f64 * c.dt;
        if !h.covers(tau_max) {
            return Err(EngineError::HistorySpan { tau_max });
        }
        let mut states = VecDeque::with_capacity(span + 1);
        for k in -(span as i64)..=0 {
            let t = k as f64 * c.dt;
            let s = h
                .eval(t)
                .ok_or(EngineError::HistorySpan { tau_max })?;
            states.push_back(s);
        }
        Ok(Self {
            dt: c.dt,
            first_index: -(span as i64),
            states,
            capacity: span + 1,
        })
    }

    /// Empty-history buffer starting from `samples` at grid indices
    /// `first_index..`. Mostly for tests.
    pub fn from_samples(dt: f64, first_index: i64, samples: Vec<State>) -> Self {
        let capacity = samples.len().max(1);
        Self {
            dt,
            first_index,
            states: samples.into(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn earliest_time(&self) -> f64 {
        self.first_index as f64 * self.dt
    }

    pub fn latest_time(&self) -> f64 {
        (self.first_index + self.states.len() as i64 - 1) as f64 * self.dt
    }

    pub fn latest(&self) -> State {
        *self.states.back().expect("history buffer is never empty")
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(move |i| (self.first_index + i as i64) as f64 * self.dt)
    }

    pub fn states(&self) -> impl Iterator<Item = &State> {
        self.states.iter()
    }

    /// Appends the next grid sample, dropping what falls out of the window.
    pub fn push(&mut self, s: State) {
        self.states.push_back(s);
        if self.states.len() > self.capacity {
            self.states.pop_front();
            self.first_index += 1;
        }
    }

    /// Sample `lag` grid steps before the newest one.
    pub fn lagged(&self, lag: usize) -> Option<&State> {
        let n = self.states.len();
        if lag >= n {
            return None;
        }
        self.states.get(n - 1 - lag)
    }

    /// State at `t - tau`: the stored sample when grid-aligned, otherwise
    /// linear interpolation between its neighbours.
    pub fn delayed_lookup(&self, t: f64, tau: f64) -> Result<State, EngineError> {
        let s = t - tau;
        let pos = s / self.dt - self.first_index as f64;
        let last = (self.states.len() - 1) as f64;
        let out_of_range = || EngineError::Lookup {
            requested: s,
            earliest: self.earliest_time(),
            latest: self.latest_time(),
        };
        let eps = GRID_EPS * pos.abs().max(1.0);
        if pos < -eps || pos > last + eps {
            return Err(out_of_range());
        }
        let nearest = pos.round();
        if (pos - nearest).abs() <= eps {
            return Ok(self.states[nearest.clamp(0.0, last) as usize]);
        }
        let lo = pos.floor() as usize;
        let w = pos - lo as f64;
        Ok(self.states[lo].lerp(&self.states[lo + 1], w))
    }
}

/// Random inputs of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Increment {
    pub normals: [f64; 3],
    pub arrivals: [u32; 3],
}

impl Increment {
    pub fn draw(rng: &mut RngStreams, lambda: f64, dt: f64, clock: JumpClock) -> Self {
        let normals = [rng.standard_normal(), rng.standard_normal(), rng.standard_normal()];
        let arrivals = match clock {
            JumpClock::Shared => [rng.poisson_count(lambda, dt); 3],
            JumpClock::Independent => [
                rng.poisson_count(lambda, dt),
                rng.poisson_count(lambda, dt),
                rng.poisson_count(lambda, dt),
            ],
        };
        Self { normals, arrivals }
    }

    pub fn jumped(&self) -> SpeciesSet {
        SpeciesSet::from_flags(self.arrivals.map(|k| k > 0))
    }
}

/// The raw Euler–Maruyama update, before positivity handling.
pub fn euler_maruyama_update(
    state: &State,
    delayed: &DelayedState,
    p: &ModelParams,
    n: &NoiseSpec,
    dt: f64,
    inc: &Increment,
) -> [f64; 3] {
    let f = model::drift_unchecked(state, delayed, p);
    let s = state.to_array();
    let sqrt_dt = dt.sqrt();
    let mut out = [0.0; 3];
    for i in 0..3 {
        let brownian = n.sigma[i] * s[i] * sqrt_dt * inc.normals[i];
        let compensated = inc.arrivals[i] as f64 - n.lambda * dt;
        out[i] = s[i] + f[i] * dt + brownian + n.q[i] * s[i] * compensated;
    }
    out
}

/// Result of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: State,
    pub increment: Increment,
    /// Components raised to the positivity floor in this step.
    pub clamped: u32,
}

/// Applies the update to `state` and clamps positive components that fell
/// below `floor`. A component that is exactly zero stays zero.
fn finish_step(
    t: f64,
    state: &State,
    raw: [f64; 3],
    inc: Increment,
    floor: f64,
) -> Result<StepResult, EngineError> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::NonFinite {
            time: t,
            previous: *state,
            normals: inc.normals,
            arrivals: inc.arrivals,
        });
    }
    let prev = state.to_array();
    let mut next = raw;
    let mut clamped = 0;
    for i in 0..3 {
        if prev[i] > 0.0 && next[i] < floor {
            next[i] = floor;
            clamped += 1;
        } else if prev[i] == 0.0 {
            next[i] = 0.0;
        }
    }
    Ok(StepResult {
        state: State::from_array(next),
        increment: inc,
        clamped,
    })
}

/// Advances the newest buffered state (at time `t`) by one step.
pub fn step(
    buffer: &HistoryBuffer,
    t: f64,
    p: &ModelParams,
    n: &NoiseSpec,
    delays: &GridDelays,
    c: &StepConfig,
    rng: &mut RngStreams,
) -> Result<StepResult, EngineError> {
    let inc = Increment::draw(rng, n.lambda, c.dt, c.jump_clock);
    step_with(buffer, t, p, n, delays, c, inc)
}

/// [`step`] with externally supplied random inputs.
pub fn step_with(
    buffer: &HistoryBuffer,
    t: f64,
    p: &ModelParams,
    n: &NoiseSpec,
    delays: &GridDelays,
    c: &StepConfig,
    inc: Increment,
) -> Result<StepResult, EngineError> {
    let state = buffer.latest();
    let tap = |lag: usize| {
        buffer.lagged(lag).copied().ok_or(EngineError::Lookup {
            requested: t - lag as f64 * c.dt,
            earliest: buffer.earliest_time(),
            latest: buffer.latest_time(),
        })
    };
    let delayed = DelayedState::from_lagged(
        &tap(delays.steps[0])?,
        &tap(delays.steps[1])?,
        &tap(delays.steps[2])?,
    );
    let raw = euler_maruyama_update(&state, &delayed, p, n, c.dt, &inc);
    finish_step(t, &state, raw, inc, c.positivity_floor)
}

/// A jump arrival, stamped with the grid time at the end of its step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub counts: [u32; 3],
}

impl JumpEvent {
    pub fn species(&self) -> SpeciesSet {
        SpeciesSet::from_flags(self.counts.map(|k| k > 0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub jumps: Vec<JumpEvent>,
    pub floor_hits: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }

    /// Component `species` (0 = x, 1 = y, 2 = z) along the path.
    pub fn component(&self, species: usize) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(move |s| s.to_array()[species])
    }
}

/// Output of [`Integrator::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub time: f64,
    pub state: State,
    pub increment: Increment,
    pub clamped: u32,
}

/// Sequential stepper for one trajectory. Owns its history window and
/// random streams.
#[derive(Debug, Clone)]
pub struct Integrator {
    params: ModelParams,
    noise: NoiseSpec,
    delays: GridDelays,
    cfg: StepConfig,
    buffer: HistoryBuffer,
    rng: RngStreams,
    step_index: usize,
    n_steps: usize,
    floor_hits: u64,
}

impl Integrator {
    /// Integrator for replicate `replicate` of the run seeded by `c.seed`.
    pub fn new(
        p: &ModelParams,
        n: &NoiseSpec,
        d: &DelaySpec,
        h: &HistorySpec,
        c: &StepConfig,
        replicate: u64,
    ) -> Result<Self, EngineError> {
        p.check()?;
        n.check()?;
        d.check()?;
        c.check(d)?;
        let delays = GridDelays::snap(d, c.dt);
        let buffer = HistoryBuffer::init(h, d, c)?;
        Ok(Self {
            params: *p,
            noise: *n,
            delays,
            cfg: *c,
            buffer,
            rng: RngStreams::new(c.seed, replicate),
            step_index: 0,
            n_steps: c.n_steps(),
            floor_hits: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.dt
    }

    pub fn state(&self) -> State {
        self.buffer.latest()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.n_steps
    }

    pub fn floor_hits(&self) -> u64 {
        self.floor_hits
    }

    pub fn buffer(&self) -> &HistoryBuffer {
        &self.buffer
    }

    pub fn advance(&mut self) -> Result<Advance, EngineError> {
        let t = self.time();
        let r = step(
            &self.buffer,
            t,
            &self.params,
            &self.noise,
            &self.delays,
            &self.cfg,
            &mut self.rng,
        )?;
        self.buffer.push(r.state);
        self.step_index += 1;
        self.floor_hits += r.clamped as u64;
        Ok(Advance {
            time: self.time(),
            state: r.state,
            increment: r.increment,
            clamped: r.clamped,
        })
    }
}

/// Integrates one sample path over `[0, t_end]` using replicate stream 0.
pub fn simulate(
    p: &ModelParams,
    n: &NoiseSpec,
    d: &DelaySpec,
    h: &HistorySpec,
    c: &StepConfig,
) -> Result<Trajectory, EngineError> {
    simulate_replicate(p, n, d, h, c, 0)
}

pub fn simulate_replicate(
    p: &ModelParams,
    n: &NoiseSpec,
    d: &DelaySpec,
    h: &HistorySpec,
    c: &StepConfig,
    replicate: u64,
) -> Result<Trajectory, EngineError> {
    let mut it = Integrator::new(p, n, d, h, c, replicate)?;
    let len = it.n_steps() + 1;
    let mut traj = Trajectory {
        dt: c.dt,
        times: Vec::with_capacity(len),
        states: Vec::with_capacity(len),
        jumps: Vec::new(),
        floor_hits: 0,
    };
    traj.times.push(0.0);
    traj.states.push(it.state());
    while !it.is_finished() {
        let a = it.advance()?;
        traj.times.push(a.time);
        traj.states.push(a.state);
        if a.increment.arrivals.iter().any(|k| *k > 0) {
            traj.jumps.push(JumpEvent {
                time: a.time,
                counts: a.increment.arrivals,
            });
        }
    }
    traj.floor_hits = it.floor_hits();
    Ok(traj)
}
