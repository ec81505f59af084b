//! Browser bindings for three small views of the simulator.
//!
//! The computations are plain functions so they can be tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use std::f64::consts::PI;

use irs_uav::channel::{alignment_phases, ChannelRealization};
use irs_uav::config::RunConfig;
use irs_uav::env::{EnvConfig, IrsUavEnv};
use irs_uav::metrics::{energy_efficiency, PhaseShifts, PowerAllocation};
use irs_uav::rng::RngStream;
use irs_uav::train::{Scheme, Trainer};
use wasm_bindgen::prelude::*;

/// Random phase draws averaged per point of the power curve.
const RANDOM_DRAWS: usize = 64;

fn single_link(elements: usize, seed: u64) -> irs_uav::Result<EnvConfig> {
    let cfg = RunConfig { clusters: 1, ues_per_cluster: 1, elements, steps: 1, ..RunConfig::default() };
    cfg.env_config(seed)
}

fn first_realization(cfg: &EnvConfig) -> irs_uav::Result<ChannelRealization> {
    let mut env = IrsUavEnv::new(cfg.clone())?;
    env.reset()?;
    Ok(env.realization().expect("reset draws a realization").clone())
}

/// Normalized EE (bits/Hz/J) of a two-element link at full power over a
/// `resolution × resolution` grid of phase pairs, row-major with θ1 along
/// rows.
pub fn landscape(resolution: usize, seed: u64) -> irs_uav::Result<Vec<f64>> {
    let cfg = single_link(2, seed)?;
    let ch = first_realization(&cfg)?;
    let net = &cfg.network;
    let powers = PowerAllocation::uniform(1, net.p_max_w);
    let step = 2.0 * PI / resolution as f64;
    let mut out = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let phases = PhaseShifts::new(vec![i as f64 * step, j as f64 * step]);
            out.push(energy_efficiency(net, &ch, &powers, &phases)? / net.bandwidth_hz);
        }
    }
    Ok(out)
}

/// `[p, ee_aligned, ee_random]` triples for `points` transmit powers up to
/// the maximum, flattened. Random-phase EE is averaged over 64 draws.
pub fn power_sweep(elements: usize, points: usize, seed: u64) -> irs_uav::Result<Vec<f64>> {
    let cfg = single_link(elements, seed)?;
    let ch = first_realization(&cfg)?;
    let net = &cfg.network;
    let aligned = PhaseShifts::new(alignment_phases(&ch.aa[0], &ch.ag[0][0]));
    let mut rng = RngStream::new(seed ^ 0x5eed);
    let random: Vec<PhaseShifts> = (0..RANDOM_DRAWS)
        .map(|_| PhaseShifts::new((0..elements).map(|_| rng.uniform_range(0.0, 2.0 * PI)).collect()))
        .collect();
    let mut out = Vec::with_capacity(3 * points);
    for i in 1..=points {
        let p = net.p_max_w * i as f64 / points as f64;
        let powers = PowerAllocation::uniform(1, p);
        let best = energy_efficiency(net, &ch, &powers, &aligned)?;
        let mut avg = 0.0;
        for phases in &random {
            avg += energy_efficiency(net, &ch, &powers, phases)?;
        }
        avg /= RANDOM_DRAWS as f64;
        out.extend([p, best / net.bandwidth_hz, avg / net.bandwidth_hz]);
    }
    Ok(out)
}

/// Per-episode mean reward of a short run at smoke scale.
pub fn short_training(scheme: &str, episodes: usize, seed: u64) -> irs_uav::Result<Vec<f64>> {
    let scheme: Scheme = scheme.parse()?;
    let cfg = RunConfig { episodes, ..RunConfig::preset("smoke")? };
    cfg.validate()?;
    let mut trainer = Trainer::new(scheme, cfg.env_config(seed)?, &cfg.train_config())?;
    Ok(trainer.run(episodes)?.rewards())
}

fn js(e: irs_uav::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn phase_landscape(resolution: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    landscape(resolution.clamp(2, 256), seed).map_err(js)
}

#[wasm_bindgen]
pub fn ee_vs_power(elements: usize, points: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    power_sweep(elements.clamp(1, 64), points.clamp(2, 200), seed).map_err(js)
}

#[wasm_bindgen]
pub fn training_curve(scheme: &str, episodes: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    short_training(scheme, episodes.clamp(1, 200), seed).map_err(js)
}
