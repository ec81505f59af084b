//! Episodic environment over the IRS-assisted downlink.
//!
//! Within an episode the UE positions and every line-of-sight term are fixed;
//! the NLoS part of each IRS-UE channel is redrawn after every step. The
//! observation is the set of own-cluster cascaded channels `H_n Φ h_nm` under
//! the phases currently on the IRS, interleaved as (re, im) pairs,
//! cluster-major.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::channel::{
    aa_channel, ag_channel_from_parts, ag_los, ag_nlos_scale, complex_normal, effective_channel, ChannelParams,
    ChannelRealization, ComplexVector, Vec3,
};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport, NetworkConfig, PhaseShifts, PowerAllocation};
use crate::rng::{streams, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub network: NetworkConfig,
    pub channel: ChannelParams,
    pub uav_positions: Vec<Vec3>,
    pub irs_position: Vec3,
    /// UEs are dropped uniformly in a disc of this radius around each UAV's
    /// ground projection.
    pub cluster_radius: f64,
    pub episode_length: usize,
    pub seed: u64,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.channel.validate()?;
        if self.channel.elements != self.network.elements {
            return Err(Error::Config(format!(
                "channel K = {} but network K = {}",
                self.channel.elements, self.network.elements
            )));
        }
        if self.uav_positions.len() != self.network.clusters {
            return Err(Error::Config(format!(
                "{} UAV positions for N = {}",
                self.uav_positions.len(),
                self.network.clusters
            )));
        }
        if !self.uav_positions.iter().chain([&self.irs_position]).all(|p| p.is_finite() && p.z >= 0.0) {
            return Err(Error::Config("node positions must be finite with z >= 0".into()));
        }
        if !(self.cluster_radius.is_finite() && self.cluster_radius > 0.0) {
            return Err(Error::Config(format!("cluster radius must be positive, got {}", self.cluster_radius)));
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2 * self.network.clusters * self.network.ues_per_cluster
    }

    pub fn action_dim(&self) -> usize {
        self.network.clusters + self.network.elements
    }
}

/// Observation: `2·N·M` reals.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn from_features(features: Vec<f64>) -> Self {
        Self(features)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub next_state: StateVector,
    /// Energy efficiency divided by bandwidth, bits/Hz/J.
    pub reward: f64,
    pub done: bool,
    pub metrics: MetricsReport,
}

/// Raw power action in `[-1, 1]` to watts.
pub fn map_power(raw: f64, p_max: f64) -> f64 {
    (raw.clamp(-1.0, 1.0) + 1.0) / 2.0 * p_max
}

/// Raw phase action in `[-1, 1]` to radians in `[0, 2π]`.
pub fn map_phase(raw: f64) -> f64 {
    (raw.clamp(-1.0, 1.0) + 1.0) * PI
}

/// Inverse of [`map_phase`] for phases in `[0, 2π]`.
pub fn phase_to_raw(theta: f64) -> f64 {
    theta / PI - 1.0
}

/// Split a centralized `N + K` raw action into powers and phases.
pub fn map_action(cfg: &NetworkConfig, raw: &[f64]) -> Result<(PowerAllocation, PhaseShifts)> {
    let expected = cfg.clusters + cfg.elements;
    if raw.len() != expected {
        return Err(Error::LengthMismatch { expected, got: raw.len() });
    }
    if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteAction(i));
    }
    let (p, t) = raw.split_at(cfg.clusters);
    let powers = PowerAllocation::new(p.iter().map(|&r| map_power(r, cfg.p_max_w)).collect(), cfg.p_max_w)?;
    let phases = PhaseShifts::new(t.iter().map(|&r| map_phase(r)).collect());
    Ok((powers, phases))
}

/// Own-cluster cascaded channels under `phases`, as interleaved (re, im).
pub fn state_features(ch: &ChannelRealization, phases: &PhaseShifts) -> Result<StateVector> {
    let mut features = Vec::with_capacity(2 * ch.clusters() * ch.ues_per_cluster());
    for (h_uav, cluster) in ch.aa.iter().zip(&ch.ag) {
        for h_ue in cluster {
            let g: Complex64 = effective_channel(h_uav, phases.as_slice(), h_ue)?;
            features.push(g.re);
            features.push(g.im);
        }
    }
    Ok(StateVector(features))
}

/// Per-episode geometry that stays fixed while NLoS terms are redrawn.
#[derive(Clone, Debug)]
struct EpisodeGeometry {
    ues: Vec<Vec<Vec3>>,
    aa: Vec<ComplexVector>,
    los: Vec<Vec<ComplexVector>>,
    nlos_scale: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct IrsUavEnv {
    cfg: EnvConfig,
    rng: RngStream,
    geometry: Option<EpisodeGeometry>,
    realization: Option<ChannelRealization>,
    phases: PhaseShifts,
    steps: usize,
    done: bool,
}

impl IrsUavEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = RngStream::with_stream(cfg.seed, streams::ENVIRONMENT);
        let k = cfg.network.elements;
        Ok(Self { cfg, rng, geometry: None, realization: None, phases: PhaseShifts::zeros(k), steps: 0, done: false })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state_dim(&self) -> usize {
        self.cfg.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.cfg.action_dim()
    }

    pub fn realization(&self) -> Option<&ChannelRealization> {
        self.realization.as_ref()
    }

    pub fn phases(&self) -> &PhaseShifts {
        &self.phases
    }

    pub fn ue_positions(&self) -> Option<&[Vec<Vec3>]> {
        self.geometry.as_ref().map(|g| g.ues.as_slice())
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Replace the current channel draw. Positions and the redraw schedule are
    /// unaffected; the next `step` still redraws NLoS from the episode geometry.
    pub fn set_realization(&mut self, ch: ChannelRealization) -> Result<()> {
        let n = &self.cfg.network;
        if ch.clusters() != n.clusters || ch.ues_per_cluster() != n.ues_per_cluster || ch.elements() != n.elements {
            return Err(Error::LengthMismatch { expected: n.clusters * n.ues_per_cluster * n.elements, got: 0 });
        }
        self.realization = Some(ch);
        Ok(())
    }

    /// Drop new UEs, draw channels, set Φ to identity and return the first
    /// observation.
    pub fn reset(&mut self) -> Result<StateVector> {
        let n = &self.cfg.network;
        let mut ues = Vec::with_capacity(n.clusters);
        for uav in &self.cfg.uav_positions {
            let cluster = (0..n.ues_per_cluster)
                .map(|_| {
                    let r = self.cfg.cluster_radius * self.rng.uniform().sqrt();
                    let phi = 2.0 * PI * self.rng.uniform();
                    Vec3::ground(uav.x + r * phi.cos(), uav.y + r * phi.sin())
                })
                .collect::<Vec<_>>();
            ues.push(cluster);
        }
        let irs = self.cfg.irs_position;
        let p = &self.cfg.channel;
        let aa = self.cfg.uav_positions.iter().map(|&u| aa_channel(u, irs, p)).collect::<Result<Vec<_>>>()?;
        let mut los = Vec::with_capacity(ues.len());
        let mut nlos_scale = Vec::with_capacity(ues.len());
        for cluster in &ues {
            los.push(cluster.iter().map(|&ue| ag_los(irs, ue, p)).collect::<Result<Vec<_>>>()?);
            nlos_scale.push(cluster.iter().map(|&ue| ag_nlos_scale(irs, ue, p)).collect::<Result<Vec<_>>>()?);
        }
        self.geometry = Some(EpisodeGeometry { ues, aa, los, nlos_scale });
        self.realization = Some(self.redraw());
        self.phases = PhaseShifts::zeros(self.cfg.network.elements);
        self.steps = 0;
        self.done = false;
        self.observe_state()
    }

    fn redraw(&mut self) -> ChannelRealization {
        let geo = self.geometry.as_ref().expect("redraw after reset");
        let k = self.cfg.network.elements;
        let mut ag = Vec::with_capacity(geo.los.len());
        for (los_row, scale_row) in geo.los.iter().zip(&geo.nlos_scale) {
            let mut row = Vec::with_capacity(los_row.len());
            for (los, &scale) in los_row.iter().zip(scale_row) {
                let nlos: Vec<Complex64> = (0..k).map(|_| complex_normal(&mut self.rng)).collect();
                row.push(ag_channel_from_parts(los, scale, &nlos));
            }
            ag.push(row);
        }
        ChannelRealization { aa: geo.aa.clone(), ag }
    }

    /// Observation under the current Φ and channel draw.
    pub fn observe_state(&self) -> Result<StateVector> {
        let ch = self.realization.as_ref().ok_or(Error::NotReset)?;
        state_features(ch, &self.phases)
    }

    /// Apply a raw centralized action (`N` powers then `K` phases, each
    /// clamped to `[-1, 1]`).
    pub fn step(&mut self, raw: &[f64]) -> Result<StepResult> {
        let (powers, phases) = map_action(&self.cfg.network, raw)?;
        self.step_mapped(powers, phases)
    }

    /// Step with already mapped powers and phases.
    pub fn step_mapped(&mut self, powers: PowerAllocation, phases: PhaseShifts) -> Result<StepResult> {
        if self.realization.is_none() {
            return Err(Error::NotReset);
        }
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let ch = self.realization.as_ref().unwrap();
        let report = metrics::report(&self.cfg.network, ch, &powers, &phases)?;
        self.phases = phases;
        self.steps += 1;
        self.done = self.steps >= self.cfg.episode_length;
        self.realization = Some(self.redraw());
        let next_state = self.observe_state()?;
        Ok(StepResult { next_state, reward: report.ee_normalized(), done: self.done, metrics: report })
    }
}

/// CSV writer for `episode,step,reward,sinr_<n>_<m>...` rows.
pub struct TrajectoryLog<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryLog<W> {
    pub fn new(mut out: W, clusters: usize, ues: usize) -> Result<Self> {
        write!(out, "episode,step,reward")?;
        for n in 0..clusters {
            for m in 0..ues {
                write!(out, ",sinr_{n}_{m}")?;
            }
        }
        writeln!(out)?;
        Ok(Self { out })
    }

    pub fn record(&mut self, episode: usize, step: usize, result: &StepResult) -> Result<()> {
        write!(self.out, "{episode},{step},{}", result.reward)?;
        for s in result.metrics.sinr.iter().flatten() {
            write!(self.out, ",{s}")?;
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_cfg(n: usize, m: usize, k: usize, seed: u64) -> EnvConfig {
        let uavs = [Vec3::new(0.0, 0.0, 200.0), Vec3::new(200.0, 300.0, 200.0), Vec3::new(400.0, 0.0, 200.0)];
        EnvConfig {
            network: NetworkConfig {
                clusters: n,
                ues_per_cluster: m,
                elements: k,
                bandwidth_hz: 1e6,
                p_max_w: 5.0,
                p_fixed_w: 4.0,
                noise_w: 3.981e-17,
            },
            channel: ChannelParams {
                beta0: 1e-3,
                kappa1: 2.0,
                kappa2: 2.2,
                rician: 4.0,
                d_over_lambda: 0.5,
                elements: k,
            },
            uav_positions: uavs[..n].to_vec(),
            irs_position: Vec3::new(500.0, 500.0, 30.0),
            cluster_radius: 500.0,
            episode_length: 5,
            seed,
        }
    }

    #[test]
    fn reset_is_deterministic_and_sized() {
        let mut a = IrsUavEnv::new(small_cfg(3, 10, 4, 7)).unwrap();
        let mut b = IrsUavEnv::new(small_cfg(3, 10, 4, 7)).unwrap();
        let sa = a.reset().unwrap();
        assert_eq!(sa, b.reset().unwrap());
        assert_eq!(sa.len(), 60);
        assert_eq!(a.observe_state().unwrap(), sa);
    }

    #[test]
    fn ues_land_inside_their_cluster_disc() {
        let cfg = small_cfg(3, 20, 2, 3);
        let mut env = IrsUavEnv::new(cfg.clone()).unwrap();
        env.reset().unwrap();
        for (uav, cluster) in cfg.uav_positions.iter().zip(env.ue_positions().unwrap()) {
            for ue in cluster {
                assert_eq!(ue.z, 0.0);
                assert!(((ue.x - uav.x).powi(2) + (ue.y - uav.y).powi(2)).sqrt() <= 500.0 + 1e-9);
            }
        }
    }

    #[test]
    fn hand_set_channels_under_identity() {
        let mut env = IrsUavEnv::new(small_cfg(1, 1, 2, 0)).unwrap();
        env.reset().unwrap();
        let one = Complex64::new(1.0, 0.0);
        env.set_realization(ChannelRealization { aa: vec![vec![one, one]], ag: vec![vec![vec![one, one]]] }).unwrap();
        assert_eq!(env.observe_state().unwrap().as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn conjugate_channels_give_real_features() {
        let mut env = IrsUavEnv::new(small_cfg(1, 2, 3, 0)).unwrap();
        env.reset().unwrap();
        let h: Vec<Complex64> = [0.3, -1.1, 2.0].iter().map(|&p| Complex64::from_polar(0.5, p)).collect();
        let conj: Vec<Complex64> = h.iter().map(|c| c.conj() / c.norm()).collect();
        env.set_realization(ChannelRealization { aa: vec![h], ag: vec![vec![conj.clone(), conj]] }).unwrap();
        let s = env.observe_state().unwrap();
        for pair in s.as_slice().chunks(2) {
            assert!(pair[0] > 0.0);
            assert!(pair[1].abs() < 1e-15);
        }
    }

    #[test]
    fn action_mapping_endpoints() {
        assert_eq!(map_power(-1.0, 5.0), 0.0);
        assert_eq!(map_power(1.0, 5.0), 5.0);
        assert_eq!(map_power(7.0, 5.0), 5.0);
        assert_eq!(map_power(-3.0, 5.0), 0.0);
        assert_eq!(map_phase(0.0), PI);
        assert_eq!(map_phase(-9.0), 0.0);
        assert_eq!(map_phase(1.0), 2.0 * PI);
        assert_eq!(phase_to_raw(map_phase(0.25)), 0.25);
    }

    #[test]
    fn zero_power_zero_reward() {
        let mut env = IrsUavEnv::new(small_cfg(3, 2, 4, 1)).unwrap();
        env.reset().unwrap();
        let mut raw = vec![-1.0; 3];
        raw.extend([0.1, 0.2, 0.3, 0.4]);
        let r = env.step(&raw).unwrap();
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn reward_is_normalized_ee_of_the_pre_step_draw() {
        let mut env = IrsUavEnv::new(small_cfg(2, 3, 4, 11)).unwrap();
        env.reset().unwrap();
        let ch = env.realization().unwrap().clone();
        let raw = [0.5, -0.2, 0.1, 0.9, -0.7, 0.0];
        let (p, t) = map_action(&env.config().network, &raw).unwrap();
        let ee = metrics::energy_efficiency(&env.config().network, &ch, &p, &t).unwrap();
        let r = env.step(&raw).unwrap();
        assert!((r.reward - ee / 1e6).abs() <= 1e-12 * r.reward.abs());
    }

    #[test]
    fn step_redraws_nlos_and_keeps_los() {
        let mut env = IrsUavEnv::new(small_cfg(2, 2, 3, 5)).unwrap();
        env.reset().unwrap();
        let before = env.realization().unwrap().clone();
        let ues = env.ue_positions().unwrap().to_vec();
        let r = env.step(&[0.0, 0.0, 0.3, -0.3, 0.9]).unwrap();
        let after = env.realization().unwrap().clone();
        assert_eq!(before.aa, after.aa);
        assert_ne!(before.ag, after.ag);
        assert_eq!(ues, env.ue_positions().unwrap());
        // next state uses the new draw and the phases just applied
        assert_eq!(r.next_state, state_features(&after, env.phases()).unwrap());
    }

    #[test]
    fn done_after_episode_length_then_error() {
        let mut env = IrsUavEnv::new(small_cfg(1, 1, 2, 2)).unwrap();
        assert!(matches!(env.step(&[0.0, 0.0, 0.0]), Err(Error::NotReset)));
        env.reset().unwrap();
        for i in 0..5 {
            let r = env.step(&[0.0, 0.0, 0.0]).unwrap();
            assert_eq!(r.done, i == 4);
        }
        assert!(matches!(env.step(&[0.0, 0.0, 0.0]), Err(Error::EpisodeDone)));
        env.reset().unwrap();
        assert!(env.step(&[0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn rejects_bad_actions() {
        let mut env = IrsUavEnv::new(small_cfg(1, 1, 2, 2)).unwrap();
        env.reset().unwrap();
        assert!(matches!(env.step(&[0.0, 0.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(env.step(&[0.0, f64::NAN, 0.0]), Err(Error::NonFiniteAction(1))));
    }

    #[test]
    fn trajectory_is_reproducible() {
        let run = || {
            let mut env = IrsUavEnv::new(small_cfg(2, 2, 3, 42)).unwrap();
            let mut log = TrajectoryLog::new(Vec::new(), 2, 2).unwrap();
            for ep in 0..2 {
                env.reset().unwrap();
                for t in 0..5 {
                    let a = [0.1 * t as f64, -0.5, 0.2, 0.4, -0.9];
                    let r = env.step(&a).unwrap();
                    log.record(ep, t, &r).unwrap();
                }
            }
            String::from_utf8(log.into_inner()).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.starts_with("episode,step,reward,sinr_0_0,sinr_0_1,sinr_1_0,sinr_1_1\n"));
        assert_eq!(a.lines().count(), 11);
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg(2, 1, 2, 0);
        c.uav_positions.pop();
        assert!(IrsUavEnv::new(c).is_err());
        let mut c = small_cfg(1, 1, 2, 0);
        c.episode_length = 0;
        assert!(c.validate().is_err());
        let mut c = small_cfg(1, 1, 2, 0);
        c.channel.elements = 3;
        assert!(c.validate().is_err());
    }
}
