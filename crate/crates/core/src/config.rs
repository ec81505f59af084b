//! Run configuration.
//!
//! Configs are TOML files. Every key is optional; a missing key takes the
//! value of the simulation-parameter table the simulator was built around,
//! so an empty file is a complete config. Unknown keys are rejected.
//!
//! ```toml
//! scheme = "p-ppo"
//! seeds = [1, 2, 3]
//! episodes = 1000
//! steps = 100               # T, steps per episode
//! jobs = 1                  # concurrent runs
//! out_dir = "runs"
//! checkpoint = false
//! sweep_elements = [10, 20, 30]
//!
//! clusters = 3              # N, takes the first N entries of `uavs`
//! ues_per_cluster = 10      # M
//! elements = 20             # K
//! bandwidth_mhz = 1.0
//! p_max_w = 5.0
//! p_fixed_w = 4.0
//! noise_dbm = -134.0
//! beta0_db = -30.0
//! kappa1 = 2.0
//! kappa2 = 2.2
//! rician = 4.0
//! d_over_lambda = 0.5
//! coverage_m = 500.0
//! irs = [500.0, 500.0, 30.0]
//! uavs = [[0.0, 0.0, 200.0], [200.0, 300.0, 200.0], [400.0, 0.0, 200.0]]
//! discount = 0.9
//! batch_size = 32
//!
//! [ddpg]
//! actor_lr = 0.001
//! critic_lr = 0.002
//! tau = 0.01
//! replay_capacity = 100000
//! noise_scale = 3.0
//! noise_decay = 0.99995
//! grad_clip = 1.0           # 0 disables clipping
//! hidden = [128, 128]
//!
//! [ppo]
//! policy_lr = 0.00001
//! value_lr = 0.0001
//! clip_epsilon = 0.2
//! horizon = 512
//! epochs = 10
//! init_std = 0.5
//! normalize_advantages = true
//! hidden = [128, 128]
//! ```
//!
//! `discount` and `batch_size` apply to both learners. dB and dBm values are
//! converted to linear units when the environment config is built.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, dbm_to_watts, ChannelParams, Vec3};
use crate::ddpg::DdpgConfig;
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::metrics::NetworkConfig;
use crate::ppo::PpoConfig;
use crate::train::{Scheme, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgSection {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    pub replay_capacity: usize,
    pub noise_scale: f64,
    pub noise_decay: f64,
    pub grad_clip: f64,
    pub hidden: Vec<usize>,
}

impl Default for DdpgSection {
    fn default() -> Self {
        let d = DdpgConfig::default();
        Self {
            actor_lr: d.actor_lr,
            critic_lr: d.critic_lr,
            tau: d.tau,
            replay_capacity: d.replay_capacity,
            noise_scale: d.noise_scale,
            noise_decay: d.noise_decay,
            grad_clip: d.grad_clip.unwrap_or(0.0),
            hidden: d.hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoSection {
    pub policy_lr: f64,
    pub value_lr: f64,
    pub clip_epsilon: f64,
    pub horizon: usize,
    pub epochs: usize,
    pub init_std: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
}

impl Default for PpoSection {
    fn default() -> Self {
        let p = PpoConfig::default();
        Self {
            policy_lr: p.policy_lr,
            value_lr: p.value_lr,
            clip_epsilon: p.clip_epsilon,
            horizon: p.horizon,
            epochs: p.epochs,
            init_std: p.init_log_std.exp(),
            normalize_advantages: p.normalize_advantages,
            hidden: p.hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub steps: usize,
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub checkpoint: bool,
    pub sweep_elements: Vec<usize>,

    pub clusters: usize,
    pub ues_per_cluster: usize,
    pub elements: usize,
    pub bandwidth_mhz: f64,
    pub p_max_w: f64,
    pub p_fixed_w: f64,
    pub noise_dbm: f64,
    pub beta0_db: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub rician: f64,
    pub d_over_lambda: f64,
    pub coverage_m: f64,
    pub irs: [f64; 3],
    pub uavs: Vec<[f64; 3]>,
    pub discount: f64,
    pub batch_size: usize,

    pub ddpg: DdpgSection,
    pub ppo: PpoSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::PPpo,
            seeds: vec![1],
            episodes: 1000,
            steps: 100,
            jobs: 1,
            out_dir: PathBuf::from("runs"),
            checkpoint: false,
            sweep_elements: vec![10, 20, 30],
            clusters: 3,
            ues_per_cluster: 10,
            elements: 20,
            bandwidth_mhz: 1.0,
            p_max_w: 5.0,
            p_fixed_w: 4.0,
            noise_dbm: -134.0,
            beta0_db: -30.0,
            kappa1: 2.0,
            kappa2: 2.2,
            rician: 4.0,
            d_over_lambda: 0.5,
            coverage_m: 500.0,
            irs: [500.0, 500.0, 30.0],
            uavs: vec![[0.0, 0.0, 200.0], [200.0, 300.0, 200.0], [400.0, 0.0, 200.0]],
            discount: 0.9,
            batch_size: 32,
            ddpg: DdpgSection::default(),
            ppo: PpoSection::default(),
        }
    }
}

/// Named configurations shipped with the simulator.
pub const PRESETS: [&str; 4] = ["table1", "smoke", "desk", "elements"];

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let cfg = match name {
            "table1" => base,
            "smoke" => Self { clusters: 1, ues_per_cluster: 2, elements: 4, episodes: 5, steps: 10, ..base },
            // Reduced scale used for the baseline comparison.
            "desk" => Self { ues_per_cluster: 4, elements: 10, episodes: 600, steps: 50, seeds: vec![1, 2, 3], ..base },
            "elements" => Self {
                ues_per_cluster: 4,
                episodes: 600,
                steps: 50,
                seeds: vec![1, 2, 3],
                sweep_elements: vec![10, 20, 30],
                ..base
            },
            other => {
                return Err(Error::Config(format!("unknown preset '{other}' (expected one of {})", PRESETS.join(", "))))
            }
        };
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.episodes == 0 || self.steps == 0 || self.jobs == 0 {
            return fail("episodes, steps and jobs must all be at least 1".into());
        }
        if self.clusters == 0 {
            return fail("clusters must be at least 1".into());
        }
        if self.clusters > self.uavs.len() {
            return fail(format!("{} clusters but only {} UAV positions", self.clusters, self.uavs.len()));
        }
        if self.sweep_elements.contains(&0) {
            return fail("sweep element counts must be at least 1".into());
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return fail(format!("discount must lie in (0, 1), got {}", self.discount));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        let d = &self.ddpg;
        if !(d.actor_lr > 0.0 && d.critic_lr > 0.0 && d.tau > 0.0 && d.tau <= 1.0) {
            return fail("ddpg learning rates and tau must be positive, tau at most 1".into());
        }
        if d.replay_capacity < self.batch_size || d.noise_scale < 0.0 || !(d.noise_decay > 0.0 && d.noise_decay <= 1.0)
        {
            return fail("ddpg replay capacity or noise settings out of range".into());
        }
        if d.grad_clip < 0.0 || d.hidden.contains(&0) {
            return fail("ddpg grad_clip must be >= 0 and hidden sizes >= 1".into());
        }
        let p = &self.ppo;
        if !(p.policy_lr > 0.0 && p.value_lr > 0.0 && p.clip_epsilon > 0.0 && p.clip_epsilon < 1.0) {
            return fail("ppo learning rates must be positive and clip_epsilon in (0, 1)".into());
        }
        if p.horizon == 0 || p.epochs == 0 || !(p.init_std > 0.0) || p.hidden.contains(&0) {
            return fail("ppo horizon, epochs, init_std and hidden sizes must be positive".into());
        }
        self.env_config(self.seeds[0])?;
        Ok(())
    }

    pub fn env_config(&self, seed: u64) -> Result<EnvConfig> {
        self.env_config_with_elements(seed, self.elements)
    }

    pub fn env_config_with_elements(&self, seed: u64, elements: usize) -> Result<EnvConfig> {
        let v = |p: &[f64; 3]| Vec3::new(p[0], p[1], p[2]);
        let cfg = EnvConfig {
            network: NetworkConfig {
                clusters: self.clusters,
                ues_per_cluster: self.ues_per_cluster,
                elements,
                bandwidth_hz: self.bandwidth_mhz * 1e6,
                p_max_w: self.p_max_w,
                p_fixed_w: self.p_fixed_w,
                noise_w: dbm_to_watts(self.noise_dbm),
            },
            channel: ChannelParams {
                beta0: db_to_linear(self.beta0_db),
                kappa1: self.kappa1,
                kappa2: self.kappa2,
                rician: self.rician,
                d_over_lambda: self.d_over_lambda,
                elements,
            },
            uav_positions: self.uavs.iter().take(self.clusters).map(v).collect(),
            irs_position: v(&self.irs),
            cluster_radius: self.coverage_m,
            episode_length: self.steps,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        let d = &self.ddpg;
        let p = &self.ppo;
        TrainConfig {
            episodes: self.episodes,
            ddpg: DdpgConfig {
                actor_lr: d.actor_lr,
                critic_lr: d.critic_lr,
                discount: self.discount,
                tau: d.tau,
                batch_size: self.batch_size,
                replay_capacity: d.replay_capacity,
                noise_scale: d.noise_scale,
                noise_decay: d.noise_decay,
                hidden: d.hidden.clone(),
                grad_clip: (d.grad_clip > 0.0).then_some(d.grad_clip),
            },
            ppo: PpoConfig {
                policy_lr: p.policy_lr,
                value_lr: p.value_lr,
                discount: self.discount,
                clip_epsilon: p.clip_epsilon,
                horizon: p.horizon,
                epochs: p.epochs,
                batch_size: self.batch_size,
                init_log_std: p.init_std.ln(),
                normalize_advantages: p.normalize_advantages,
                hidden: p.hidden.clone(),
            },
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}
