//! Built-in parameter sets.
//!
//! `fig1`..`fig3` are the three published parameter columns. They do not
//! fix `a1`, `a2`; those default to 0.05 and every output is flagged.
//! `extinction`, `persistence` and `predator_extinction` are constructed so
//! that the corresponding criterion provably holds. `fig4`..`fig9` are sweep
//! presets layered on the persistence scenario.

use std::fmt;
use std::str::FromStr;

use sdpp_core::{DelaySpec, ModelParams, NoiseSpec, State};

use crate::config::Key;

pub const ASSUMED_A: f64 = 0.05;
pub const DEFAULT_DT: f64 = 1e-2;
pub const DEFAULT_T_END: f64 = 200.0;
pub const TABLE_Q: [f64; 3] = [-0.04, -0.006, -0.008];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    Extinction,
    Persistence,
    PredatorExtinction,
}

impl Preset {
    pub const ALL: [Preset; 12] = [
        Preset::Fig1,
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig8,
        Preset::Fig9,
        Preset::Extinction,
        Preset::Persistence,
        Preset::PredatorExtinction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1 => "fig1",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Extinction => "extinction",
            Preset::Persistence => "persistence",
            Preset::PredatorExtinction => "predator_extinction",
        }
    }

    pub fn values(self) -> PresetValues {
        match self {
            Preset::Fig1 => published(
                [0.7, 0.65],
                [0.3, 0.35, 0.5],
                1e-4,
                0.1,
                [1e-4, 2e-4, 2e-4],
            ),
            Preset::Fig2 => published(
                [1.7, 1.8],
                [0.2, 0.28, 0.5],
                1e-4,
                0.4,
                [1e-5, 2e-4, 2e-3],
            ),
            Preset::Fig3 => published(
                [2.0, 2.3],
                [0.13, 0.17, 0.2],
                1e-3,
                0.02,
                [1e-5, 2e-4, 2e-3],
            ),
            Preset::Extinction => extinction(),
            Preset::Persistence => persistence(),
            Preset::PredatorExtinction => {
                let mut v = persistence();
                v.params.a1 = 1e-4;
                v.params.a2 = 1e-4;
                v.params.delta = 0.1;
                v
            }
            Preset::Fig4 => sweep(&[Key::A1, Key::A2], &[0.05, 0.1, 0.15]),
            Preset::Fig5 => sweep(&[Key::K1, Key::K2], &[50.0, 100.0, 150.0]),
            Preset::Fig6 => sweep(&[Key::Tau1], &[0.5, 1.0, 1.5, 2.0]),
            Preset::Fig7 => sweep(&[Key::Tau2], &[0.5, 1.0, 1.5, 2.0]),
            Preset::Fig8 => sweep(&[Key::Tau3], &[0.5, 1.0, 1.5, 2.0]),
            Preset::Fig9 => sweep(&[Key::Tau1, Key::Tau2, Key::Tau3], &[0.5, 1.0]),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
                format!("unknown preset `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetValues {
    pub params: ModelParams,
    pub noise: NoiseSpec,
    pub delays: DelaySpec,
    pub initial: State,
    pub dt: f64,
    pub t_end: f64,
    /// Whether `a1`, `a2` are part of the preset rather than the fallback.
    pub defines_a: bool,
    pub sweep: Option<(Vec<Key>, Vec<f64>)>,
}

fn published(r: [f64; 2], alpha: [f64; 3], beta: f64, delta: f64, sigma: [f64; 3]) -> PresetValues {
    PresetValues {
        params: ModelParams {
            r1: r[0],
            r2: r[1],
            k1: 100.0,
            k2: 100.0,
            alpha1: alpha[0],
            alpha2: alpha[1],
            alpha3: alpha[2],
            beta,
            delta,
            a1: ASSUMED_A,
            a2: ASSUMED_A,
        },
        noise: NoiseSpec {
            sigma,
            q: TABLE_Q,
            lambda: NoiseSpec::DEFAULT_LAMBDA,
        },
        delays: DelaySpec {
            tau1: 0.5,
            tau2: 1.0,
            tau3: 1.5,
        },
        initial: State::new(50.0, 50.0, 10.0),
        dt: DEFAULT_DT,
        t_end: DEFAULT_T_END,
        defines_a: false,
        sweep: None,
    }
}

fn constructed(params: ModelParams, sigma: [f64; 3]) -> PresetValues {
    PresetValues {
        params,
        noise: NoiseSpec {
            sigma,
            q: TABLE_Q,
            lambda: NoiseSpec::DEFAULT_LAMBDA,
        },
        delays: DelaySpec {
            tau1: 0.5,
            tau2: 1.0,
            tau3: 1.5,
        },
        initial: State::new(2.0, 2.0, 2.0),
        dt: DEFAULT_DT,
        t_end: 500.0,
        defines_a: true,
        sweep: None,
    }
}

fn extinction() -> PresetValues {
    constructed(
        ModelParams {
            r1: 0.1,
            r2: 0.1,
            k1: 100.0,
            k2: 100.0,
            alpha1: 0.3,
            alpha2: 0.3,
            alpha3: 0.5,
            beta: 1e-4,
            delta: 0.1,
            a1: 0.05,
            a2: 0.05,
        },
        [1.0, 1.0, 0.5],
    )
}

fn persistence() -> PresetValues {
    constructed(
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
        },
        [1e-4, 2e-4, 2e-4],
    )
}

fn sweep(keys: &[Key], values: &[f64]) -> PresetValues {
    let mut v = persistence();
    v.t_end = 50.0;
    v.sweep = Some((keys.to_vec(), values.to_vec()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("fig10".parse::<Preset>().is_err());
    }

    #[test]
    fn published_columns() {
        let v = Preset::Fig3.values();
        assert_eq!(v.params.r1, 2.0);
        assert_eq!(v.params.r2, 2.3);
        assert_eq!(v.params.alpha1, 0.13);
        assert_eq!(v.params.alpha2, 0.17);
        assert_eq!(v.params.alpha3, 0.2);
        assert_eq!(v.params.beta, 0.001);
        assert_eq!(v.params.delta, 0.02);
        assert_eq!(v.noise.sigma, [1e-5, 2e-4, 2e-3]);
        assert_eq!(v.noise.q, TABLE_Q);
        assert_eq!(v.delays.as_array(), [0.5, 1.0, 1.5]);
        assert!(!v.defines_a);
        let v = Preset::Fig1.values();
        assert_eq!(v.noise.sigma, [1e-4, 2e-4, 2e-4]);
        assert_eq!((v.params.alpha1, v.params.alpha2, v.params.delta), (0.3, 0.35, 0.1));
    }

    #[test]
    fn every_preset_is_structurally_valid() {
        for p in Preset::ALL {
            let v = p.values();
            let report = sdpp_core::model::validate(&v.params, &v.noise, &v.delays);
            assert!(report.structural_ok(), "{p}: {report}");
        }
    }
}
