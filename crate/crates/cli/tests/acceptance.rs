//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use sdpp_cli::presets::Preset;
use sdpp_core::analysis::{self, classify, Regime};
use sdpp_core::engine::Integrator;
use sdpp_core::ensemble::{
    run_ensemble, run_ensemble_in_order, verify_regime, EnsembleOptions, Outcome, ToleranceSpec,
};
use sdpp_core::oracle::{convergence_study, solve_deterministic, Scheme};
use sdpp_core::{simulate, DelaySpec, HistorySpec, ModelParams, NoiseSpec, StepConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Scenario {
    params: ModelParams,
    noise: NoiseSpec,
    delays: DelaySpec,
    history: HistorySpec,
}

fn scenario(p: Preset) -> Scenario {
    let v = p.values();
    Scenario {
        params: v.params,
        noise: v.noise,
        delays: v.delays,
        history: HistorySpec::Constant(v.initial),
    }
}

fn threshold_exactness() -> Check {
    let start = Instant::now();
    let delays = DelaySpec::new(0.5, 1.0, 1.5).unwrap();
    let fig1 = scenario(Preset::Fig1);
    let r1 = classify(&fig1.params, &fig1.noise, &delays);
    let fig2 = scenario(Preset::Fig2);
    let r2 = classify(&fig2.params, &fig2.noise, &delays);
    let fig3 = scenario(Preset::Fig3);
    let r3 = classify(&fig3.params, &fig3.noise, &delays);
    let elapsed = start.elapsed().as_secs_f64();

    ensure((r1.c1 - (0.7 - 5e-9)).abs() <= 1e-15, || format!("fig1 c1 = {}", r1.c1))?;
    ensure(r1.c1 > 0.0, || "fig1 c1 should be positive".into())?;
    let b1_hand = 1e-8 + 0.0016 + 1.4 + 0.01 - 30.0;
    let b1 = r1.boundedness.b[0];
    ensure((b1 - b1_hand).abs() <= 1e-12, || format!("fig1 B1 = {b1}, hand {b1_hand}"))?;
    ensure((b1 * 1e3).round() / 1e3 == -28.588, || format!("fig1 B1 = {b1} does not round to -28.588"))?;
    ensure(!r1.existence_ok, || "fig1 delta > alpha3 should fail".into())?;
    ensure(!r1.extinction_holds, || "fig1 extinction hypothesis should fail".into())?;

    ensure((r2.c1 - (1.7 - 5e-11)).abs() <= 1e-15, || format!("fig2 c1 = {}", r2.c1))?;
    let b1_fig2 = 1e-10 + 0.0016 + 3.4 + 0.01 - 20.0;
    ensure((r2.boundedness.b[0] - b1_fig2).abs() <= 1e-12, || format!("fig2 B1 = {}", r2.boundedness.b[0]))?;
    ensure(!r2.existence_ok, || "fig2 delta > alpha3 should fail".into())?;

    let (d1, _) = analysis::persistence_denominators(&fig3.params);
    ensure((d1 - (-0.96)).abs() <= 1e-14, || format!("fig3 D1 = {d1}"))?;
    let b1_fig3 = 1e-10 + 0.0016 + 4.0 + 0.1 - 13.0;
    ensure((r3.boundedness.b[0] - b1_fig3).abs() <= 1e-12, || format!("fig3 B1 = {}", r3.boundedness.b[0]))?;
    ensure(!r3.predator_extinction_holds && !r3.persistence_holds, || "fig3 auxiliary condition should fail".into())?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!(
        "fig1 c1 = {:.12}, B1 = {:.8}, delta>alpha3 {}; fig3 D1 = {d1}; {:.2} ms",
        r1.c1,
        b1,
        r1.existence_ok,
        elapsed * 1e3
    ))
}

fn regime_ensemble(preset: Preset, expected: Regime) -> Check {
    let s = scenario(preset);
    let report = classify(&s.params, &s.noise, &s.delays);
    ensure(report.predicted == expected, || {
        format!("classifier predicted {} instead of {expected}", report.predicted)
    })?;
    let c = StepConfig::new(1e-2, 500.0, 2024);
    let opts = EnsembleOptions::new(200, 2024).with_target_points(&c, 1000);
    let stats = run_ensemble(&s.params, &s.noise, &s.delays, &s.history, &c, &opts).map_err(|e| e.to_string())?;
    let v = verify_regime(&stats, &report, &ToleranceSpec::default()).map_err(|e| e.to_string())?;
    let checks: Vec<String> = v.checks.iter().map(|c| c.to_string()).collect();
    let detail = format!("{}; {}", expected, checks.join("; "));
    ensure(v.outcome == Outcome::Pass, || detail.clone())?;
    let extra = match expected {
        Regime::ExtinctionAll => {
            let ec = analysis::extinction_coefficients(&s.params, &s.noise).unwrap();
            ensure((ec.max() - (-0.4)).abs() < 1e-12, || format!("max c = {}", ec.max()))?;
            format!("max c = {:.6}", ec.max())
        }
        Regime::AllPersist => {
            let b = report.persistence.unwrap();
            ensure((b.lx - 0.98039).abs() < 1e-4 && (b.ly - 0.98039).abs() < 1e-4, || format!("Lx = {}", b.lx))?;
            ensure((b.lz - 0.8804).abs() < 1e-3, || format!("Lz = {}", b.lz))?;
            format!("Lx = Ly = {:.5}, Lz = {:.4}", b.lx, b.lz)
        }
        _ => format!("c4 = {:.6}", report.c4),
    };
    Ok(format!("{extra}; {detail}"))
}

fn fig3_core() -> (ModelParams, DelaySpec, HistorySpec) {
    let s = scenario(Preset::Fig3);
    (s.params, s.delays, s.history)
}

fn deterministic_convergence() -> Check {
    let (p, d, h) = fig3_core();
    let dts = [1e-2, 5e-3, 2.5e-3];
    let t_end = 4.0;
    let euler = convergence_study(&p, &d, &h, &dts, t_end, Scheme::EulerEngine, 1.25e-4).map_err(|e| e.to_string())?;
    let rk4 = convergence_study(&p, &d, &h, &dts, t_end, Scheme::Rk4, 1.25e-4).map_err(|e| e.to_string())?;
    let oe = euler.overall_order.ok_or("no engine order")?;
    let or = rk4.overall_order.ok_or("no oracle order")?;
    let detail = format!("engine order {oe:.4}, oracle self-convergence order {or:.4} (t_end = {t_end})");
    ensure((0.8..=1.2).contains(&oe) && (3.5..=4.5).contains(&or), || detail.clone())?;
    Ok(detail)
}

fn logistic_closed_form() -> Check {
    let p = ModelParams {
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
    };
    let h = HistorySpec::constant(10.0, 0.0, 0.0).unwrap();
    let exact = |t: f64| 100.0 / (1.0 + (100.0 / 10.0 - 1.0) * (-t).exp());
    let sol = solve_deterministic(&p, &DelaySpec::none(), &h, 1e-3, 10.0).map_err(|e| e.to_string())?;
    let worst = sol
        .times
        .iter()
        .zip(&sol.states)
        .map(|(t, s)| ((s.x - exact(*t)) / exact(*t)).abs())
        .fold(0.0, f64::max);
    let traj = simulate(&p, &NoiseSpec::zero(), &DelaySpec::none(), &h, &StepConfig::new(1e-3, 10.0, 0))
        .map_err(|e| e.to_string())?;
    let engine_worst = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| ((s.x - exact(*t)) / exact(*t)).abs())
        .fold(0.0, f64::max);
    let detail = format!(
        "reference solver max relative error {worst:.3e} over [0, 10]; engine (first order, informational) {engine_worst:.3e}"
    );
    ensure(worst <= 1e-6, || detail.clone())?;
    Ok(detail)
}

fn compensator_neutrality() -> Check {
    let p = ModelParams {
        r1: 0.0,
        r2: 0.0,
        k1: 1.0,
        k2: 1.0,
        alpha1: 0.0,
        alpha2: 0.0,
        alpha3: 0.0,
        beta: 0.0,
        delta: 0.0,
        a1: 0.0,
        a2: 0.0,
    };
    let n = NoiseSpec::new([0.0; 3], [-0.04, -0.006, -0.008], 1.0).unwrap();
    let h = HistorySpec::constant(50.0, 50.0, 10.0).unwrap();
    let c = StepConfig::new(1e-2, 5.0, 7);
    let reps = 100_000;
    let opts = EnsembleOptions::new(reps, 7).with_record_stride(c.n_steps());
    let stats = run_ensemble(&p, &n, &DelaySpec::none(), &h, &c, &opts).map_err(|e| e.to_string())?;
    let last = stats.mean.len() - 1;
    ensure(stats.times[last] == 5.0, || format!("terminal grid time {}", stats.times[last]))?;
    let s0 = [50.0, 50.0, 10.0];
    let mut parts = Vec::new();
    let mut ok = true;
    for i in 0..3 {
        let se = stats.sd[last][i] / (reps as f64).sqrt();
        let z = (stats.mean[last][i] - s0[i]) / se;
        ok &= z.abs() <= 3.0;
        parts.push(format!("{}: mean {:.5} vs {} ({z:+.2} SE)", ["x", "y", "z"][i], stats.mean[last][i], s0[i]));
    }
    let detail = format!("{reps} replicates, T = 5: {}", parts.join(", "));
    ensure(ok, || detail.clone())?;
    Ok(detail)
}

fn positivity() -> Check {
    let s = scenario(Preset::Persistence);
    let c = StepConfig::new(1e-3, 50.0, 99);
    let runs = 1000usize;
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4);
    let results: Vec<(u64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let s = &s;
                scope.spawn(move || {
                    (w..runs)
                        .step_by(threads)
                        .map(|k| -> Result<(u64, f64), String> {
                            let mut it = Integrator::new(&s.params, &s.noise, &s.delays, &s.history, &c, k as u64)
                                .map_err(|e| e.to_string())?;
                            let mut lo = it.state().to_array().into_iter().fold(f64::INFINITY, f64::min);
                            while !it.is_finished() {
                                let a = it.advance().map_err(|e| e.to_string())?;
                                lo = a.state.to_array().into_iter().fold(lo, f64::min);
                            }
                            Ok((it.floor_hits(), lo))
                        })
                        .collect::<Result<Vec<_>, String>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker").expect("run")).collect()
    });
    let clean = results.iter().filter(|(hits, _)| *hits == 0).count();
    let min_state = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let detail = format!(
        "{clean}/{runs} runs without floor hits, smallest emitted state {min_state:.4e} (dt = 1e-3, T = 50)"
    );
    ensure(clean * 100 >= runs * 99 && min_state >= 1e-12, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("sdpp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "preset = persistence\nt_end = 20\n").map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_sdpp"))
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", "42", "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("simulate exited with {status}"))?;
        files.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(files[0] == files[1], || "simulate --seed 42 outputs differ".into())?;

    let s = scenario(Preset::Extinction);
    let c = StepConfig::new(1e-2, 20.0, 5);
    let opts = EnsembleOptions::new(64, 5);
    let forward = run_ensemble(&s.params, &s.noise, &s.delays, &s.history, &c, &opts).map_err(|e| e.to_string())?;
    let mut order: Vec<usize> = (0..64).collect();
    order.reverse();
    order.swap(3, 40);
    let shuffled =
        run_ensemble_in_order(&s.params, &s.noise, &s.delays, &s.history, &c, &opts, &order).map_err(|e| e.to_string())?;
    ensure(forward == shuffled, || "ensemble statistics depend on replicate order".into())?;
    Ok(format!(
        "two seed-42 CSVs byte-identical ({} bytes); 64-replicate ensemble identical under permuted execution",
        files[0].len()
    ))
}

fn amplitude(s: &Scenario, tau1: f64, seed: u64) -> Result<f64, String> {
    let mut d = s.delays;
    d.tau1 = tau1;
    let traj = simulate(&s.params, &s.noise, &d, &s.history, &StepConfig::new(1e-2, 50.0, seed)).map_err(|e| e.to_string())?;
    let (lo, hi) = traj
        .states
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), st| (lo.min(st.x), hi.max(st.x)));
    Ok(hi - lo)
}

fn delay_sweep() -> Check {
    let s = scenario(Preset::Persistence);
    let seeds = 100u64;
    let mut wins = 0;
    for seed in 0..seeds {
        if amplitude(&s, 2.0, seed)? > amplitude(&s, 0.5, seed)? {
            wins += 1;
        }
    }
    let detail = format!("amplitude of x on [0, 50] larger for tau1 = 2 than 0.5 in {wins}/{seeds} seeds");
    ensure(wins * 100 >= 80 * seeds, || detail.clone())?;
    Ok(detail)
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Check>)> = vec![
        ("threshold exactness", Box::new(threshold_exactness)),
        ("extinction scenario", Box::new(|| regime_ensemble(Preset::Extinction, Regime::ExtinctionAll))),
        ("persistence scenario", Box::new(|| regime_ensemble(Preset::Persistence, Regime::AllPersist))),
        (
            "predator-extinction scenario",
            Box::new(|| regime_ensemble(Preset::PredatorExtinction, Regime::PredatorExtinctPreyPersist)),
        ),
        ("deterministic convergence", Box::new(deterministic_convergence)),
        ("logistic closed form", Box::new(logistic_closed_form)),
        ("compensator neutrality", Box::new(compensator_neutrality)),
        ("positivity", Box::new(positivity)),
        ("determinism", Box::new(determinism)),
        ("delay sweep amplitude", Box::new(delay_sweep)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{:>2}] {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name} ({secs:.1} s): {detail}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
