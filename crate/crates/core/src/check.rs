//! Self-checks runnable from the command line: a straight-line metric
//! oracle, finite-difference gradient checks and structural invariants.

use std::f64::consts::{LN_2, PI};

use crate::channel::{alignment_phases, effective_channel, ChannelParams, ChannelRealization, Vec3};
use crate::ddpg::{DdpgAgent, DdpgConfig, ReplayBuffer, Transition};
use crate::env::{state_features, EnvConfig, IrsUavEnv};
use crate::error::Result;
use crate::metrics::{report, NetworkConfig, PhaseShifts, PowerAllocation};
use crate::nn::gradcheck::{max_relative_error, relative_error};
use crate::nn::{soft_update, Mlp, OutputActivation};
use crate::ppo::{clipped_objective, PpoAgent, PpoConfig, RolloutEntry};
use crate::rng::RngStream;
use crate::train::{Scheme, TrainConfig, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

/// A random network instance with its realization and a random action.
pub struct Instance {
    pub cfg: NetworkConfig,
    pub channel: ChannelRealization,
    pub powers: Vec<f64>,
    pub phases: Vec<f64>,
}

pub fn random_instance(max_n: usize, max_m: usize, max_k: usize, rng: &mut RngStream) -> Result<Instance> {
    let n = 1 + rng.index(max_n);
    let m = 1 + rng.index(max_m);
    let k = 1 + rng.index(max_k);
    let p_max = rng.uniform_range(0.5, 10.0);
    let cfg = NetworkConfig {
        clusters: n,
        ues_per_cluster: m,
        elements: k,
        bandwidth_hz: rng.uniform_range(1e5, 1e7),
        p_max_w: p_max,
        p_fixed_w: rng.uniform_range(0.5, 8.0),
        noise_w: 10f64.powf(rng.uniform_range(-18.0, -12.0)),
    };
    let params = ChannelParams {
        beta0: 10f64.powf(rng.uniform_range(-4.0, -2.0)),
        kappa1: rng.uniform_range(1.8, 3.0),
        kappa2: rng.uniform_range(1.8, 3.5),
        rician: rng.uniform_range(0.0, 10.0),
        d_over_lambda: rng.uniform_range(0.1, 1.0),
        elements: k,
    };
    let irs = Vec3::new(rng.uniform_range(0.0, 1000.0), rng.uniform_range(0.0, 1000.0), rng.uniform_range(10.0, 60.0));
    let uavs: Vec<Vec3> = (0..n)
        .map(|_| {
            Vec3::new(rng.uniform_range(0.0, 1000.0), rng.uniform_range(0.0, 1000.0), rng.uniform_range(100.0, 300.0))
        })
        .collect();
    let ues: Vec<Vec<Vec3>> = (0..n)
        .map(|_| (0..m).map(|_| Vec3::ground(rng.uniform_range(0.0, 1000.0), rng.uniform_range(0.0, 1000.0))).collect())
        .collect();
    let channel = ChannelRealization::draw(&uavs, irs, &ues, &params, rng)?;
    let powers = (0..n).map(|_| rng.uniform_range(0.01, p_max)).collect();
    let phases = (0..k).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
    Ok(Instance { cfg, channel, powers, phases })
}

/// Plain-arithmetic reference: `(sinr[n][m], rate[n][m], total_rate, total_power, ee)`.
#[allow(clippy::type_complexity)]
pub fn straight_line_metrics(inst: &Instance) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64, f64, f64) {
    let cfg = &inst.cfg;
    let ch = &inst.channel;
    let gain = |i: usize, n: usize, m: usize| {
        let (mut re, mut im) = (0.0, 0.0);
        for k in 0..cfg.elements {
            let (a, b) = (ch.aa[i][k].re, ch.aa[i][k].im);
            let (c, s) = (inst.phases[k].cos(), inst.phases[k].sin());
            let (e, f) = (ch.ag[n][m][k].re, ch.ag[n][m][k].im);
            // (a + jb)(c + js) = (ac - bs) + j(as + bc)
            let (x, y) = (a * c - b * s, a * s + b * c);
            re += x * e - y * f;
            im += x * f + y * e;
        }
        re * re + im * im
    };
    let mut sinr = vec![vec![0.0; cfg.ues_per_cluster]; cfg.clusters];
    let mut rate = sinr.clone();
    let mut total_rate = 0.0;
    for n in 0..cfg.clusters {
        for m in 0..cfg.ues_per_cluster {
            let signal = inst.powers[n] * gain(n, n, m);
            let mut interference = 0.0;
            for i in 0..cfg.clusters {
                if i != n {
                    interference += inst.powers[i] * gain(i, n, m);
                }
            }
            let s = signal / (interference + cfg.noise_w);
            sinr[n][m] = s;
            // log2(1 + s) via ln_1p: weak links have SINR far below 1e-9
            rate[n][m] = cfg.bandwidth_hz * s.ln_1p() / LN_2;
            total_rate += rate[n][m];
        }
    }
    let total_power = inst.powers.iter().sum::<f64>() + cfg.p_fixed_w;
    (sinr, rate, total_rate, total_power, total_rate / total_power)
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Largest relative disagreement between the metric pipeline and the
/// straight-line reference over `instances` random instances.
pub fn metric_oracle_error(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = RngStream::new(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let inst = random_instance(3, 4, 8, &mut rng)?;
        let r = report(
            &inst.cfg,
            &inst.channel,
            &PowerAllocation::new(inst.powers.clone(), inst.cfg.p_max_w)?,
            &PhaseShifts::new(inst.phases.clone()),
        )?;
        let (sinr, rate, total_rate, total_power, ee) = straight_line_metrics(&inst);
        for (a, b) in r.sinr.iter().flatten().zip(sinr.iter().flatten()) {
            worst = worst.max(rel(*a, *b));
        }
        for (a, b) in r.rate.iter().flatten().zip(rate.iter().flatten()) {
            worst = worst.max(rel(*a, *b));
        }
        worst = worst.max(rel(r.total_rate, total_rate)).max(rel(r.total_power, total_power)).max(rel(r.ee, ee));
    }
    Ok(worst)
}

pub fn metric_oracle(instances: usize, seed: u64) -> CheckReport {
    match metric_oracle_error(instances, seed) {
        Ok(e) => CheckReport::new("metric oracle", e <= 1e-9, format!("{instances} instances, max rel err {e:.2e}")),
        Err(e) => CheckReport::new("metric oracle", false, format!("error: {e}")),
    }
}

/// Worst relative error per network role: actor, critic, value, policy
/// mean, actor-through-critic, PPO surrogate.
pub fn gradient_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut rng = RngStream::new(seed);
    let (s, a) = (1 + rng.index(6), 1 + rng.index(4));
    let batch = 4;
    let mut out = Vec::new();
    let shapes: [(&str, Vec<usize>, OutputActivation); 4] = [
        ("actor", vec![s, 16, 16, a], OutputActivation::Tanh),
        ("critic", vec![s + a, 16, 16, 1], OutputActivation::Identity),
        ("value", vec![s, 16, 16, 1], OutputActivation::Identity),
        ("policy", vec![s, 16, 16, a], OutputActivation::Tanh),
    ];
    for (name, sizes, act) in shapes {
        let net = Mlp::new(&sizes, act, 1.0, &mut rng);
        let x: Vec<f64> = (0..batch * sizes[0]).map(|_| rng.standard_normal()).collect();
        let seed_vec: Vec<f64> = (0..batch * sizes[sizes.len() - 1]).map(|_| rng.standard_normal()).collect();
        out.push((name, max_relative_error(&net, &x, batch, &seed_vec, 1e-5)));
    }

    let h = 1e-5;
    let ddpg = DdpgAgent::new(s, a, DdpgConfig { hidden: vec![12, 12], ..DdpgConfig::default() }, &mut rng);
    let critic = Mlp::new(&[s + a, 12, 12, 1], OutputActivation::Identity, 1.0, &mut rng);
    let states: Vec<f64> = (0..batch * s).map(|_| rng.standard_normal()).collect();
    let (_, grads) = ddpg.actor_objective_gradient(&states, &critic);
    let mut probe = ddpg.clone();
    let mut worst = 0.0f64;
    for i in 0..probe.actor.num_params() {
        let orig = probe.actor.params()[i];
        probe.actor.params_mut()[i] = orig + h;
        let up = probe.actor_objective_gradient(&states, &critic).0;
        probe.actor.params_mut()[i] = orig - h;
        let down = probe.actor_objective_gradient(&states, &critic).0;
        probe.actor.params_mut()[i] = orig;
        worst = worst.max(relative_error(grads[i], (up - down) / (2.0 * h)));
    }
    out.push(("actor through critic", worst));

    let mut ppo = PpoAgent::new(s, a, PpoConfig { hidden: vec![12, 12], ..PpoConfig::default() }, &mut rng);
    let entries: Vec<RolloutEntry> = (0..6)
        .map(|_| {
            let state: Vec<f64> = (0..s).map(|_| rng.standard_normal()).collect();
            let sample = ppo.act(&state, &mut rng);
            RolloutEntry {
                state: state.clone(),
                action: sample.raw,
                reward: 0.0,
                next_state: state,
                log_prob: sample.log_prob,
            }
        })
        .collect();
    // leave p = 1 but stay well inside the clip band
    for p in ppo.policy.mean.params_mut() {
        *p += 0.002 * rng.standard_normal();
    }
    let adv: Vec<f64> = (0..entries.len()).map(|_| rng.standard_normal()).collect();
    let refs: Vec<&RolloutEntry> = entries.iter().collect();
    let (g_mean, g_log_std) = ppo.surrogate_gradient(&refs, &adv);
    let mut worst = 0.0f64;
    for i in 0..ppo.policy.mean.num_params() {
        let orig = ppo.policy.mean.params()[i];
        ppo.policy.mean.params_mut()[i] = orig + h;
        let up = ppo.surrogate(&entries, &adv);
        ppo.policy.mean.params_mut()[i] = orig - h;
        let down = ppo.surrogate(&entries, &adv);
        ppo.policy.mean.params_mut()[i] = orig;
        worst = worst.max(relative_error(g_mean[i], (up - down) / (2.0 * h)));
    }
    let base = ppo.policy.log_std().to_vec();
    for d in 0..a {
        let mut shifted = base.clone();
        shifted[d] += h;
        ppo.policy.set_log_std(&shifted);
        let up = ppo.surrogate(&entries, &adv);
        shifted[d] -= 2.0 * h;
        ppo.policy.set_log_std(&shifted);
        let down = ppo.surrogate(&entries, &adv);
        ppo.policy.set_log_std(&base);
        worst = worst.max(relative_error(g_log_std[d], (up - down) / (2.0 * h)));
    }
    out.push(("ppo surrogate", worst));
    out
}

pub fn gradients(seed: u64) -> CheckReport {
    let errs = gradient_errors(seed);
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let detail: Vec<String> = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    CheckReport::new("gradients", worst < 1e-4, detail.join(", "))
}

fn alignment_bound(rng: &mut RngStream) -> CheckReport {
    let mut ok = true;
    let mut worst_gap = f64::INFINITY;
    for _ in 0..200 {
        let inst = match random_instance(1, 1, 8, rng) {
            Ok(i) => i,
            Err(e) => return CheckReport::new("coherent alignment bound", false, e.to_string()),
        };
        let (h, g) = (&inst.channel.aa[0], &inst.channel.ag[0][0]);
        let aligned = effective_channel(h, &alignment_phases(h, g), g).map(|c| c.norm()).unwrap_or(f64::NAN);
        let bound: f64 = h.iter().zip(g).map(|(a, b)| a.norm() * b.norm()).sum();
        ok &= rel(aligned, bound) < 1e-12;
        for _ in 0..20 {
            let phases: Vec<f64> = (0..h.len()).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect();
            let other = effective_channel(h, &phases, g).map(|c| c.norm()).unwrap_or(f64::NAN);
            ok &= other <= aligned * (1.0 + 1e-12);
            worst_gap = worst_gap.min(aligned - other);
        }
    }
    CheckReport::new("coherent alignment bound", ok, format!("min aligned-minus-random gap {worst_gap:.3e}"))
}

fn clip_branches() -> CheckReport {
    let eps = 0.2;
    let mut ok = true;
    for i in 0..=60 {
        let p = i as f64 * 0.05;
        for adv in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let split = if adv >= 0.0 { p.min(1.0 + eps) * adv } else { p.max(1.0 - eps) * adv };
            ok &= (clipped_objective(p, adv, eps) - split).abs() < 1e-12;
        }
    }
    CheckReport::new("clip-branch agreement", ok, "ratios 0..3, five advantages".into())
}

fn replay_eviction() -> CheckReport {
    let mut buf = ReplayBuffer::new(5);
    for i in 0..12 {
        buf.push(Transition { state: vec![i as f64], action: vec![0.0], reward: i as f64, next_state: vec![0.0] });
    }
    let kept: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    CheckReport::new("replay eviction", buf.len() == 5 && kept == [7.0, 8.0, 9.0, 10.0, 11.0], format!("kept {kept:?}"))
}

fn soft_update_algebra(rng: &mut RngStream) -> CheckReport {
    let online: Vec<f64> = (0..32).map(|_| rng.standard_normal()).collect();
    let target: Vec<f64> = (0..32).map(|_| rng.standard_normal()).collect();
    let mut copy = target.clone();
    soft_update(&mut copy, &online, 1.0);
    let mut frozen = target.clone();
    soft_update(&mut frozen, &online, 0.0);
    let mut mixed = target.clone();
    soft_update(&mut mixed, &online, 0.01);
    let ok = copy == online
        && frozen == target
        && mixed.iter().zip(&online).zip(&target).all(|((m, o), t)| (m - (0.01 * o + 0.99 * t)).abs() < 1e-15);
    CheckReport::new("soft-update algebra", ok, "kappa in {0, 0.01, 1}".into())
}

fn small_env(seed: u64) -> EnvConfig {
    EnvConfig {
        network: NetworkConfig {
            clusters: 2,
            ues_per_cluster: 2,
            elements: 4,
            bandwidth_hz: 1e6,
            p_max_w: 5.0,
            p_fixed_w: 4.0,
            noise_w: 3.981e-17,
        },
        channel: ChannelParams { beta0: 1e-3, kappa1: 2.0, kappa2: 2.2, rician: 4.0, d_over_lambda: 0.5, elements: 4 },
        uav_positions: vec![Vec3::new(0.0, 0.0, 200.0), Vec3::new(200.0, 300.0, 200.0)],
        irs_position: Vec3::new(500.0, 500.0, 30.0),
        cluster_radius: 500.0,
        episode_length: 10,
        seed,
    }
}

fn information_hiding(rng: &mut RngStream) -> Result<CheckReport> {
    let cfg = small_env(rng.next_u64());
    let mut env = IrsUavEnv::new(cfg.clone())?;
    env.reset()?;
    let ch = env.realization().expect("reset draws channels").clone();
    let phases = PhaseShifts::new((0..4).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect());

    // Rotating each element's two hops in opposite directions changes every
    // raw channel but no cascaded gain.
    let mut gauged = ch.clone();
    for k in 0..4 {
        let rot = num_complex::Complex64::from_polar(1.0, rng.uniform_range(0.0, 2.0 * PI));
        for h in &mut gauged.aa {
            h[k] *= rot;
        }
        for row in &mut gauged.ag {
            for g in row {
                g[k] /= rot;
            }
        }
    }
    let a = state_features(&ch, &phases)?;
    let b = state_features(&gauged, &phases)?;
    let gauge_ok = a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1e-30));

    // Powers never reach the observation.
    let mut low = env.clone();
    let mut high = env;
    let phase_raw: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let mut raw_low = vec![-0.9, -0.5];
    raw_low.extend(&phase_raw);
    let mut raw_high = vec![0.8, 1.0];
    raw_high.extend(&phase_raw);
    let s_low = low.step(&raw_low)?.next_state;
    let s_high = high.step(&raw_high)?.next_state;
    let power_ok = s_low == s_high && a.len() == cfg.state_dim();
    Ok(CheckReport::new(
        "state information-hiding",
        gauge_ok && power_ok,
        format!("gauge invariance {gauge_ok}, power independence {power_ok}"),
    ))
}

fn determinism() -> Result<CheckReport> {
    let train = TrainConfig { episodes: 3, ..TrainConfig::default() };
    let run = |scheme, seed| -> Result<Vec<f64>> {
        let mut t = Trainer::new(scheme, small_env(seed), &train)?;
        Ok(t.run(3)?.rewards())
    };
    let mut ok = true;
    for scheme in Scheme::ALL {
        ok &= run(scheme, 5)? == run(scheme, 5)?;
        ok &= run(scheme, 5)? != run(scheme, 6)?;
    }
    Ok(CheckReport::new("determinism under seed", ok, "all six schemes, 3 episodes".into()))
}

pub fn invariants(seed: u64) -> Vec<CheckReport> {
    let mut rng = RngStream::new(seed);
    let failed = |name: &str, e: crate::Error| CheckReport::new(name, false, format!("error: {e}"));
    vec![
        alignment_bound(&mut rng),
        clip_branches(),
        replay_eviction(),
        soft_update_algebra(&mut rng),
        information_hiding(&mut rng).unwrap_or_else(|e| failed("state information-hiding", e)),
        determinism().unwrap_or_else(|e| failed("determinism under seed", e)),
    ]
}

/// Every check, in a fixed order.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let mut out = vec![metric_oracle(1000, seed), gradients(seed)];
    out.extend(invariants(seed));
    out
}
