//! Deterministic reference solver for the noise-free delayed system.
//!
//! Classic four-stage Runge–Kutta on a uniform grid. Delayed arguments that
//! fall in the prescribed history are evaluated from the history itself;
//! later ones use cubic Lagrange interpolation through the four nearest
//! computed grid points.

use thiserror::Error;

use crate::engine::{self, EngineError, StepConfig};
use crate::model::{self, DelaySpec, DelayedState, HistorySpec, ModelParams, NoiseSpec, State};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid input: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("history does not cover t = {time}")]
    HistorySpan { time: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub dt: f64,
    pub order: u32,
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl ReferenceSolution {
    /// Grid sample at `t`, when `t` lies on the grid.
    pub fn at(&self, t: f64) -> Option<State> {
        let k = (t / self.dt).round();
        if k < 0.0 || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) {
            return None;
        }
        self.states.get(k as usize).copied()
    }

    pub fn last(&self) -> State {
        *self.states.last().expect("solution has at least the initial state")
    }
}

const GRID_TOL: f64 = 1e-9;

fn grid_steps(tau: f64, dt: f64, name: &str) -> Result<usize, OracleError> {
    let k = (tau / dt).round();
    if (k * dt - tau).abs() > GRID_TOL * tau.max(dt) {
        return Err(OracleError::Config(format!(
            "dt = {dt} does not divide {name} = {tau}"
        )));
    }
    Ok(k as usize)
}

struct DenseSolution<'a> {
    dt: f64,
    history: &'a HistorySpec,
    states: &'a [State],
    /// Grid indices where low derivatives of the solution may jump.
    breaks: &'a [usize],
}

impl DenseSolution<'_> {
    /// First node of a stencil bracketing `(j, j + 1)` that avoids
    /// straddling a breakpoint, centred when possible.
    fn stencil_start(&self, j: usize, latest: usize, width: usize) -> usize {
        let last_start = latest + 1 - width;
        let clean = |start: usize| {
            !self
                .breaks
                .iter()
                .any(|&b| b > start && b < start + width - 1)
        };
        [j.checked_sub(1), Some(j), j.checked_sub(2)]
            .into_iter()
            .flatten()
            .filter(|s| *s <= j && *s <= last_start && *s + width > j + 1)
            .find(|s| clean(*s))
            .unwrap_or_else(|| j.saturating_sub(1).min(last_start))
    }

    fn eval(&self, s: f64) -> Result<[f64; 3], OracleError> {
        if s <= 0.0 {
            return self
                .history
                .eval(s)
                .map(State::to_array)
                .ok_or(OracleError::HistorySpan { time: s });
        }
        let u = s / self.dt;
        let latest = self.states.len() - 1;
        let j = u.floor();
        if j as usize > latest || (j as usize == latest && u > j) {
            return Err(OracleError::Config(format!("lookup at t = {s} is ahead of the solution")));
        }
        let j = j as usize;
        if u == j as f64 {
            return Ok(self.states[j].to_array());
        }
        let width = 4.min(latest + 1);
        let start = self.stencil_start(j, latest, width);
        let mut out = [0.0; 3];
        for a in 0..width {
            let mut w = 1.0;
            for b in 0..width {
                if a != b {
                    w *= (u - (start + b) as f64) / (a as f64 - b as f64);
                }
            }
            let v = self.states[start + a].to_array();
            for i in 0..3 {
                out[i] += w * v[i];
            }
        }
        Ok(out)
    }
}

/// Grid indices of sums of at most three delays. A constant history meets
/// the solution with a kink at zero which then propagates to these points,
/// smoothing by one derivative per delay.
fn breakpoints(lags: [usize; 3], n: usize) -> Vec<usize> {
    let mut out = vec![0];
    let mut frontier = vec![0];
    for _ in 0..3 {
        let mut next = Vec::new();
        for &b in &frontier {
            for &l in lags.iter().filter(|l| **l > 0) {
                if b + l <= n {
                    next.push(b + l);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        out.extend(&next);
        frontier = next;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Integrates the noise-free system on `[0, t_end]`.
pub fn solve_deterministic(
    p: &ModelParams,
    d: &DelaySpec,
    h: &HistorySpec,
    dt: f64,
    t_end: f64,
) -> Result<ReferenceSolution, OracleError> {
    p.check()?;
    d.check()?;
    h.check()?;
    if !(dt > 0.0 && dt.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
        return Err(OracleError::Config(format!("need dt > 0 and t_end > 0, got dt = {dt}, t_end = {t_end}")));
    }
    let taus = d.as_array();
    let lags = [
        grid_steps(taus[0], dt, "tau1")?,
        grid_steps(taus[1], dt, "tau2")?,
        grid_steps(taus[2], dt, "tau3")?,
    ];
    if !h.covers(d.tau_max()) {
        return Err(OracleError::HistorySpan { time: -d.tau_max() });
    }
    let taus = lags.map(|k| k as f64 * dt);
    let n = StepConfig::new(dt, t_end, 0).n_steps();
    let breaks = breakpoints(lags, n);
    let mut states = Vec::with_capacity(n + 1);
    states.push(h.initial_state());

    for k in 0..n {
        let t = k as f64 * dt;
        let s0 = states[k].to_array();
        let stage = |c: f64, y: [f64; 3], states: &[State]| -> Result<[f64; 3], OracleError> {
            let dense = DenseSolution {
                dt,
                history: h,
                states,
                breaks: &breaks,
            };
            let now = State::from_array(y);
            let at = |i: usize| -> Result<[f64; 3], OracleError> {
                if lags[i] == 0 {
                    Ok(y)
                } else {
                    dense.eval(t + c * dt - taus[i])
                }
            };
            let (l1, l2, l3) = (at(0)?, at(1)?, at(2)?);
            let delayed = DelayedState {
                x_tau1: l1[0],
                y_tau2: l2[1],
                x_tau3: l3[0],
                y_tau3: l3[1],
            };
            Ok(model::drift_unchecked(&now, &delayed, p))
        };
        let axpy = |a: f64, x: [f64; 3]| std::array::from_fn::<f64, 3, _>(|i| s0[i] + a * x[i]);
        let k1 = stage(0.0, s0, &states)?;
        let k2 = stage(0.5, axpy(0.5 * dt, k1), &states)?;
        let k3 = stage(0.5, axpy(0.5 * dt, k2), &states)?;
        let k4 = stage(1.0, axpy(dt, k3), &states)?;
        let next: [f64; 3] = std::array::from_fn(|i| {
            s0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        });
        if next.iter().any(|v| !v.is_finite()) {
            return Err(OracleError::NonFinite { time: t + dt });
        }
        states.push(State::from_array(next.map(|v| v.max(0.0))));
    }
    let times = (0..=n).map(|k| k as f64 * dt).collect();
    Ok(ReferenceSolution {
        dt,
        order: 4,
        times,
        states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// The stochastic engine with noise and jumps switched off.
    EulerEngine,
    /// This module's Runge–Kutta solver.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub max_err: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub reference_dt: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log err` against `log dt`.
    pub overall_order: Option<f64>,
}

fn solve_with(
    scheme: Scheme,
    p: &ModelParams,
    d: &DelaySpec,
    h: &HistorySpec,
    dt: f64,
    t_end: f64,
) -> Result<Vec<State>, OracleError> {
    match scheme {
        Scheme::Rk4 => Ok(solve_deterministic(p, d, h, dt, t_end)?.states),
        Scheme::EulerEngine => {
            let c = StepConfig::new(dt, t_end, 0);
            Ok(engine::simulate(p, &NoiseSpec::zero(), d, h, &c)?.states)
        }
    }
}

/// Max-norm error of `scheme` at each `dt` against an RK4 solution at
/// `reference_dt`, measured on the coarse grid.
pub fn convergence_study(
    p: &ModelParams,
    d: &DelaySpec,
    h: &HistorySpec,
    dt_list: &[f64],
    t_end: f64,
    scheme: Scheme,
    reference_dt: f64,
) -> Result<ConvergenceTable, OracleError> {
    if dt_list.is_empty() {
        return Err(OracleError::Config("dt list is empty".into()));
    }
    if dt_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OracleError::Config("dt list must be strictly descending".into()));
    }
    let reference = solve_deterministic(p, d, h, reference_dt, t_end)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dt_list.len());
    for &dt in dt_list {
        let ratio = grid_steps(dt, reference_dt, "dt")?;
        if ratio == 0 {
            return Err(OracleError::Config(format!(
                "dt = {dt} is finer than the reference step {reference_dt}"
            )));
        }
        let states = solve_with(scheme, p, d, h, dt, t_end)?;
        let mut max_err: f64 = 0.0;
        for (k, s) in states.iter().enumerate() {
            let Some(r) = reference.states.get(k * ratio) else {
                break;
            };
            for (a, b) in s.to_array().iter().zip(r.to_array()) {
                max_err = max_err.max((a - b).abs());
            }
        }
        let order = rows.last().and_then(|prev| {
            (prev.max_err > 0.0 && max_err > 0.0)
                .then(|| (prev.max_err / max_err).ln() / (prev.dt / dt).ln())
        });
        rows.push(ConvergenceRow { dt, max_err, order });
    }
    let overall_order = least_squares_order(&rows);
    Ok(ConvergenceTable {
        scheme,
        reference_dt,
        rows,
        overall_order,
    })
}

fn least_squares_order(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| r.max_err <= 0.0) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.dt.ln(), r.max_err.ln())).collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn stable_params() -> ModelParams {
        ModelParams {
            r1: 0.5,
            r2: 0.5,
            k1: 100.0,
            k2: 100.0,
            alpha1: 0.3,
            alpha2: 0.3,
            alpha3: 0.2,
            beta: 1e-4,
            delta: 0.02,
            a1: 0.1,
            a2: 0.1,
        }
    }

    fn logistic_params() -> ModelParams {
        ModelParams {
            r1: 1.0,
            r2: 0.0,
            k1: 100.0,
            k2: 1.0,
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            beta: 0.0,
            delta: 0.0,
            a1: 0.0,
            a2: 0.0,
        }
    }

    #[test]
    fn equilibria_are_preserved_over_long_horizon() {
        let p = stable_params();
        let d = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
        let h = HistorySpec::constant(100.0, 100.0, 0.0).unwrap();
        let sol = solve_deterministic(&p, &d, &h, 0.01, 500.0).unwrap();
        for s in &sol.states {
            assert!((s.x - 100.0).abs() <= 1e-9 * 100.0);
            assert!((s.y - 100.0).abs() <= 1e-9 * 100.0);
            assert_eq!(s.z, 0.0);
        }
        let h = HistorySpec::constant(0.0, 0.0, 0.0).unwrap();
        let sol = solve_deterministic(&p, &d, &h, 0.01, 500.0).unwrap();
        assert!(sol.states.iter().all(|s| *s == State::ORIGIN));
    }

    #[test]
    fn logistic_matches_closed_form() {
        let h = HistorySpec::constant(10.0, 0.0, 0.0).unwrap();
        let sol = solve_deterministic(&logistic_params(), &DelaySpec::none(), &h, 1e-3, 1.0).unwrap();
        let exact = 100.0 / (1.0 + 9.0 * (-1.0f64).exp());
        assert_relative_eq!(exact, 23.20, max_relative = 1e-3);
        assert_relative_eq!(sol.last().x, exact, max_relative = 1e-6);
        assert_relative_eq!(sol.at(1.0).unwrap().x, exact, max_relative = 1e-6);
    }

    #[test]
    fn delayed_self_convergence_is_fourth_order() {
        let p = stable_params();
        let d = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
        let h = HistorySpec::constant(2.0, 2.0, 2.0).unwrap();
        let t = convergence_study(&p, &d, &h, &[1e-2, 5e-3], 5.0, Scheme::Rk4, 1e-4).unwrap();
        let ratio = t.rows[0].max_err / t.rows[1].max_err;
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}, table {t:?}");
    }

    #[test]
    fn engine_noise_off_is_first_order() {
        let p = stable_params();
        let d = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
        let h = HistorySpec::constant(2.0, 2.0, 2.0).unwrap();
        let t = convergence_study(&p, &d, &h, &[2e-2, 1e-2, 5e-3], 5.0, Scheme::EulerEngine, 1e-3).unwrap();
        let order = t.overall_order.unwrap();
        assert!((0.8..=1.2).contains(&order), "{t:?}");
        assert!(t.rows.windows(2).all(|w| w[1].max_err < w[0].max_err));
    }

    #[test]
    fn self_comparison_has_zero_error() {
        let p = stable_params();
        let d = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
        let h = HistorySpec::constant(2.0, 2.0, 2.0).unwrap();
        let t = convergence_study(&p, &d, &h, &[1e-2], 2.0, Scheme::Rk4, 1e-2).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].max_err, 0.0);
        assert_eq!(t.rows[0].order, None);
        assert_eq!(t.overall_order, None);
    }

    #[test]
    fn rejects_non_dividing_step() {
        let d = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
        let h = HistorySpec::constant(2.0, 2.0, 2.0).unwrap();
        let err = solve_deterministic(&stable_params(), &d, &h, 0.3, 1.0).unwrap_err();
        assert!(err.to_string().contains("tau1"), "{err}");
        let err = convergence_study(&stable_params(), &d, &h, &[1e-2, 2e-2], 1.0, Scheme::Rk4, 1e-3);
        assert!(matches!(err, Err(OracleError::Config(_))));
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let f = |t: f64| 1.0 + t - 0.5 * t * t + 0.25 * t * t * t;
        let dt = 0.1;
        let states: Vec<State> = (0..10).map(|k| {
            let v = f(k as f64 * dt);
            State::new(v, v, v)
        }).collect();
        let h = HistorySpec::constant(0.0, 0.0, 0.0).unwrap();
        let dense = DenseSolution { dt, history: &h, states: &states, breaks: &[0] };
        for s in [0.05, 0.15, 0.43, 0.85, 0.9] {
            assert_relative_eq!(dense.eval(s).unwrap()[0], f(s), max_relative = 1e-12);
        }
        assert_eq!(dense.eval(-0.2).unwrap(), [0.0; 3]);
        assert!(dense.eval(0.95).is_err());
    }
}
