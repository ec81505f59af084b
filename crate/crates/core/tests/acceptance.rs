//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no libtest harness) so the lines always reach
//! stdout. Criterion 6 is reported but never fails the run. Set
//! `ACCEPTANCE_ONLY=3,5` to run a subset.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use irs_uav::channel::ChannelRealization;
use irs_uav::check::{gradient_errors, invariants, metric_oracle_error};
use irs_uav::config::RunConfig;
use irs_uav::env::IrsUavEnv;
use irs_uav::experiment::FINAL_WINDOW;
use irs_uav::metrics::{energy_efficiency, PhaseShifts, PowerAllocation};
use irs_uav::plot::{moving_average, DEFAULT_WINDOW};
use irs_uav::rng::{streams, RngStream};
use irs_uav::train::{Scheme, Trace, Trainer};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

const SEEDS: [u64; 3] = [1, 2, 3];

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let err = metric_oracle_error(1000, 7).expect("random instances are valid");
    let secs = start.elapsed().as_secs_f64();
    verdict(err <= 1e-9 && secs < 10.0, format!("max relative error {err:.2e} over 1000 instances in {secs:.2}s"))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut worst: Vec<(&str, f64)> = Vec::new();
    for seed in 1..=10 {
        for (name, e) in gradient_errors(seed) {
            match worst.iter_mut().find(|w| w.0 == name) {
                Some(w) => w.1 = w.1.max(e),
                None => worst.push((name, e)),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let parts: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    verdict(max < 1e-4 && secs < 30.0, format!("10 random nets per role, worst: {} ({secs:.1}s)", parts.join(", ")))
}

/// Greedy rewards of a trained team on `episodes` evaluation episodes, with
/// the channel realization each reward was earned on.
fn evaluate_recording(
    trainer: &Trainer,
    cfg: &RunConfig,
    seed: u64,
    episodes: usize,
) -> Vec<(ChannelRealization, f64)> {
    let mut env = IrsUavEnv::new(cfg.env_config(seed).unwrap()).unwrap();
    let mut rng = RngStream::with_stream(seed, streams::BASELINE);
    let mut out = Vec::new();
    for _ in 0..episodes {
        let mut state = env.reset().unwrap();
        loop {
            let ch = env.realization().unwrap().clone();
            let action = trainer.team.greedy_action(state.as_slice(), &mut rng);
            let step = env.step(&action).unwrap();
            out.push((ch, step.reward));
            if step.done {
                break;
            }
            state = step.next_state;
        }
    }
    out
}

/// Best mean EE over the 8 × 8 × 8 grid of fixed (power, θ1, θ2) actions.
fn grid_optimum(cfg: &RunConfig, channels: &[&ChannelRealization]) -> f64 {
    let net = cfg.env_config(1).unwrap().network;
    let mut best = f64::MIN;
    for pi in 1..=8 {
        let powers = PowerAllocation::uniform(1, net.p_max_w * pi as f64 / 8.0);
        for a in 0..8 {
            for b in 0..8 {
                let phases = PhaseShifts::new(vec![a as f64 * PI / 4.0, b as f64 * PI / 4.0]);
                let total: f64 = channels
                    .iter()
                    .map(|ch| energy_efficiency(&net, ch, &powers, &phases).unwrap() / net.bandwidth_hz)
                    .sum();
                best = best.max(total / channels.len() as f64);
            }
        }
    }
    best
}

fn criterion_3() -> Verdict {
    let cfg =
        RunConfig { clusters: 1, ues_per_cluster: 1, elements: 2, episodes: 300, steps: 50, ..RunConfig::default() };
    let mut passed = true;
    let mut parts = Vec::new();
    for scheme in [Scheme::CDdpg, Scheme::CPpo] {
        let start = Instant::now();
        let mut ratios = Vec::new();
        for seed in SEEDS {
            let mut trainer = Trainer::new(scheme, cfg.env_config(seed).unwrap(), &cfg.train_config()).unwrap();
            trainer.run(cfg.episodes).unwrap();
            let eval = evaluate_recording(&trainer, &cfg, 10_000 + seed, 20);
            let agent = mean(&eval.iter().map(|e| e.1).collect::<Vec<_>>());
            let channels: Vec<&ChannelRealization> = eval.iter().map(|e| &e.0).collect();
            ratios.push(agent / grid_optimum(&cfg, &channels));
        }
        let secs = start.elapsed().as_secs_f64();
        let r = mean(&ratios);
        passed &= r >= 0.95 && secs < 180.0;
        parts.push(format!(
            "{scheme} {:.3} of grid optimum (seeds {:.3}/{:.3}/{:.3}, {secs:.0}s)",
            r, ratios[0], ratios[1], ratios[2]
        ));
    }
    verdict(passed, parts.join("; "))
}

struct DeskRuns {
    traces: Vec<(Scheme, Vec<Trace>, f64)>,
}

impl DeskRuns {
    fn get(&self, scheme: Scheme) -> &[Trace] {
        &self.traces.iter().find(|t| t.0 == scheme).unwrap().1
    }

    fn final_mean(&self, scheme: Scheme) -> f64 {
        mean(&self.get(scheme).iter().map(|t| t.final_mean(FINAL_WINDOW)).collect::<Vec<_>>())
    }

    fn seconds(&self, scheme: Scheme) -> f64 {
        self.traces.iter().find(|t| t.0 == scheme).unwrap().2
    }
}

fn desk_config() -> RunConfig {
    RunConfig::preset("desk").unwrap()
}

fn desk_runs(schemes: &[Scheme]) -> DeskRuns {
    let cfg = desk_config();
    let traces = schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let traces = SEEDS
                .iter()
                .map(|&seed| {
                    let mut t = Trainer::new(scheme, cfg.env_config(seed).unwrap(), &cfg.train_config()).unwrap();
                    t.run(cfg.episodes).unwrap()
                })
                .collect();
            (scheme, traces, start.elapsed().as_secs_f64())
        })
        .collect();
    DeskRuns { traces }
}

fn criterion_4(runs: &DeskRuns) -> Verdict {
    let rss = runs.final_mean(Scheme::Rss);
    let mpt = runs.final_mean(Scheme::Mpt);
    let mut passed = true;
    let mut parts = vec![format!("rss {rss:.4}, mpt {mpt:.4}")];
    for scheme in [Scheme::CDdpg, Scheme::PDdpg, Scheme::CPpo, Scheme::PPpo] {
        let ee = runs.final_mean(scheme);
        let secs = runs.seconds(scheme);
        let ok = ee >= 1.3 * rss && ee >= 1.1 * mpt && secs < 900.0;
        passed &= ok;
        parts.push(format!("{scheme} {ee:.4} ({:.2}x rss, {:.2}x mpt, {secs:.0}s)", ee / rss, ee / mpt));
    }
    verdict(passed, parts.join("; "))
}

fn criterion_5(runs: &DeskRuns) -> Verdict {
    let base = desk_config();
    let mut finals: Vec<Vec<f64>> = vec![runs.get(Scheme::PPpo).iter().map(|t| t.final_mean(FINAL_WINDOW)).collect()];
    for k in [20, 30] {
        let cfg = RunConfig { elements: k, ..base.clone() };
        finals.push(
            SEEDS
                .iter()
                .map(|&seed| {
                    let mut t = Trainer::new(Scheme::PPpo, cfg.env_config(seed).unwrap(), &cfg.train_config()).unwrap();
                    t.run(cfg.episodes).unwrap().final_mean(FINAL_WINDOW)
                })
                .collect(),
        );
    }
    let means: Vec<f64> = finals.iter().map(|f| mean(f)).collect();
    let pooled = mean(&finals.iter().map(|f| sample_var(f)).collect::<Vec<_>>()).sqrt();
    let passed = means.windows(2).all(|w| w[1] >= w[0] - pooled);
    verdict(
        passed,
        format!(
            "p-ppo final EE K=10 {:.4}, K=20 {:.4}, K=30 {:.4}; pooled std {pooled:.4}",
            means[0], means[1], means[2]
        ),
    )
}

/// First episode whose trailing window-25 mean reaches 90% of the final EE.
fn episodes_to_90(trace: &Trace) -> usize {
    let target = 0.9 * trace.final_mean(FINAL_WINDOW);
    moving_average(&trace.rewards(), DEFAULT_WINDOW)
        .into_iter()
        .find(|&(_, v)| v >= target)
        .map_or(trace.records.len(), |(e, _)| e)
}

fn criterion_6(runs: &DeskRuns) -> Verdict {
    let c: Vec<usize> = runs.get(Scheme::CPpo).iter().map(episodes_to_90).collect();
    let p: Vec<usize> = runs.get(Scheme::PPpo).iter().map(episodes_to_90).collect();
    let wins = c.iter().zip(&p).filter(|(c, p)| p <= c).count();
    verdict(
        wins >= 2,
        format!("episodes to 90% of final: p-ppo {p:?} vs c-ppo {c:?}; p-ppo not slower in {wins}/3 seeds"),
    )
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut failed = Vec::new();
    let mut count = 0;
    for seed in SEEDS {
        for r in invariants(seed) {
            count += 1;
            if !r.passed {
                failed.push(format!("{} (seed {seed}): {}", r.name, r.detail));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = if failed.is_empty() {
        format!("{count} invariant checks green in {secs:.1}s")
    } else {
        format!("failed: {}", failed.join("; "))
    };
    verdict(failed.is_empty() && secs < 60.0, detail)
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|o| o.contains(&id));
    let mut hard_failures = 0;
    let mut report = |id: u32, name: &str, v: Verdict, hard: bool| {
        let tag = if v.passed { "PASS" } else { "FAIL" };
        let note = if hard { "" } else { " (report-only)" };
        println!("criterion {id} [{tag}] {name}{note}: {}", v.detail);
        if hard && !v.passed {
            hard_failures += 1;
        }
    };

    if wanted(1) {
        report(1, "metric oracle equivalence", criterion_1(), true);
    }
    if wanted(2) {
        report(2, "gradient correctness", criterion_2(), true);
    }
    if wanted(3) {
        report(3, "exhaustive-search oracle", criterion_3(), true);
    }
    if wanted(4) || wanted(5) || wanted(6) {
        let runs = if wanted(4) { desk_runs(&Scheme::ALL) } else { desk_runs(&[Scheme::CPpo, Scheme::PPpo]) };
        if wanted(4) {
            report(4, "baseline dominance", criterion_4(&runs), true);
        }
        if wanted(5) {
            report(5, "element-count monotonicity", criterion_5(&runs), true);
        }
        if wanted(6) {
            report(6, "convergence-speed ordering", criterion_6(&runs), false);
        }
    }
    if wanted(7) {
        report(7, "invariant suites", criterion_7(), true);
    }

    if hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{hard_failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
