//! Runs the six experimental schemes over the environment.
//!
//! | scheme  | learners                                  | pinned part            |
//! |---------|-------------------------------------------|------------------------|
//! | c-ddpg  | one DDPG agent, action N + K              |                        |
//! | p-ddpg  | N DDPG power agents + one DDPG IRS agent  |                        |
//! | c-ppo   | one PPO agent, action N + K               |                        |
//! | p-ppo   | N PPO power agents + one PPO IRS agent    |                        |
//! | mpt     | one PPO agent over the K phases           | powers at P_max        |
//! | rss     | one PPO agent over the N powers           | phases uniform random  |
//!
//! Every agent observes the same full state and receives the same scalar
//! reward. Agents act in lockstep: all actions for a step are gathered before
//! the single environment step executes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ddpg::{DdpgAgent, DdpgConfig, ReplayBuffer, Transition};
use crate::env::{phase_to_raw, EnvConfig, IrsUavEnv};
use crate::error::{Error, Result};
use crate::ppo::{PpoAgent, PpoConfig, RolloutBuffer, RolloutEntry};
use crate::rng::{streams, RngStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    CDdpg,
    PDdpg,
    CPpo,
    PPpo,
    Mpt,
    Rss,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [Scheme::CDdpg, Scheme::PDdpg, Scheme::CPpo, Scheme::PPpo, Scheme::Mpt, Scheme::Rss];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::CDdpg => "c-ddpg",
            Scheme::PDdpg => "p-ddpg",
            Scheme::CPpo => "c-ppo",
            Scheme::PPpo => "p-ppo",
            Scheme::Mpt => "mpt",
            Scheme::Rss => "rss",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Scheme::Mpt | Scheme::Rss)
    }

    pub fn is_parallel(self) -> bool {
        matches!(self, Scheme::PDdpg | Scheme::PPpo)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.tag().to_string()
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|sc| sc.tag() == s.trim().to_ascii_lowercase()).ok_or_else(|| {
            Error::Config(format!("unknown scheme '{s}' (expected one of c-ddpg, p-ddpg, c-ppo, p-ppo, mpt, rss)"))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub ddpg: DdpgConfig,
    pub ppo: PpoConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { episodes: 1000, ddpg: DdpgConfig::default(), ppo: PpoConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Mean of the episode's step rewards (bits/Hz/J).
    pub mean_reward: f64,
    /// DDPG exploration scale, or mean policy standard deviation for PPO.
    pub noise_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub scheme: Scheme,
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
}

impl Trace {
    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.mean_reward).collect()
    }

    /// Mean reward of the last `n` episodes (all of them if fewer).
    pub fn final_mean(&self, n: usize) -> f64 {
        let k = n.min(self.records.len()).max(1);
        self.records[self.records.len().saturating_sub(k)..].iter().map(|r| r.mean_reward).sum::<f64>() / k as f64
    }
}

/// One learning agent with its own experience store.
#[derive(Clone, Debug)]
pub enum Learner {
    Ddpg { agent: Box<DdpgAgent>, buffer: ReplayBuffer },
    Ppo { agent: Box<PpoAgent>, rollout: RolloutBuffer, pending: Option<(Vec<f64>, f64)> },
}

impl Learner {
    fn new_ddpg(state_dim: usize, action_dim: usize, cfg: &DdpgConfig, rng: &mut RngStream) -> Self {
        Learner::Ddpg {
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            agent: Box::new(DdpgAgent::new(state_dim, action_dim, cfg.clone(), rng)),
        }
    }

    fn new_ppo(state_dim: usize, action_dim: usize, cfg: &PpoConfig, rng: &mut RngStream) -> Self {
        Learner::Ppo {
            agent: Box::new(PpoAgent::new(state_dim, action_dim, cfg.clone(), rng)),
            rollout: RolloutBuffer::new(),
            pending: None,
        }
    }

    /// Exploratory action for training.
    fn explore(&mut self, state: &[f64], rng: &mut RngStream) -> Vec<f64> {
        match self {
            Learner::Ddpg { agent, .. } => agent.act_with_noise(state, rng),
            Learner::Ppo { agent, pending, .. } => {
                let s = agent.act(state, rng);
                *pending = Some((s.raw, s.log_prob));
                s.action
            }
        }
    }

    pub fn greedy(&self, state: &[f64]) -> Vec<f64> {
        match self {
            Learner::Ddpg { agent, .. } => agent.act(state),
            Learner::Ppo { agent, .. } => agent.policy.greedy(state),
        }
    }

    /// Store the transition and run whatever update is due.
    fn observe(&mut self, state: &[f64], action: Vec<f64>, reward: f64, next_state: &[f64], rng: &mut RngStream) {
        match self {
            Learner::Ddpg { agent, buffer } => {
                buffer.push(Transition { state: state.to_vec(), action, reward, next_state: next_state.to_vec() });
                agent.train_step(buffer, rng);
            }
            Learner::Ppo { agent, rollout, pending } => {
                let (raw, log_prob) = pending.take().expect("observe without a preceding explore");
                rollout.push(RolloutEntry {
                    state: state.to_vec(),
                    action: raw,
                    reward,
                    next_state: next_state.to_vec(),
                    log_prob,
                });
                if rollout.len() >= agent.config().horizon {
                    agent.update(rollout, rng);
                }
            }
        }
    }

    fn exploration_level(&self) -> f64 {
        match self {
            Learner::Ddpg { agent, .. } => agent.noise_scale(),
            Learner::Ppo { agent, .. } => agent.policy.mean_std(),
        }
    }

    /// Writes the agent's networks and optimizer state.
    pub fn save(&self, w: &mut impl std::io::Write) -> Result<()> {
        match self {
            Learner::Ddpg { agent, .. } => agent.save(w),
            Learner::Ppo { agent, .. } => agent.save(w),
        }
    }
}

/// The learners of one scheme plus how their outputs fill a centralized action.
#[derive(Clone, Debug)]
pub struct AgentTeam {
    scheme: Scheme,
    clusters: usize,
    elements: usize,
    pub members: Vec<Learner>,
}

impl AgentTeam {
    pub fn new(scheme: Scheme, env: &EnvConfig, train: &TrainConfig, rng: &mut RngStream) -> Result<Self> {
        let n = env.network.clusters;
        let k = env.network.elements;
        if n == 0 {
            return Err(Error::Config("a team needs at least one UAV".into()));
        }
        let sd = env.state_dim();
        let members = match scheme {
            Scheme::CDdpg => vec![Learner::new_ddpg(sd, n + k, &train.ddpg, rng)],
            Scheme::CPpo => vec![Learner::new_ppo(sd, n + k, &train.ppo, rng)],
            Scheme::PDdpg => {
                let mut m: Vec<_> = (0..n).map(|_| Learner::new_ddpg(sd, 1, &train.ddpg, rng)).collect();
                m.push(Learner::new_ddpg(sd, k, &train.ddpg, rng));
                m
            }
            Scheme::PPpo => {
                let mut m: Vec<_> = (0..n).map(|_| Learner::new_ppo(sd, 1, &train.ppo, rng)).collect();
                m.push(Learner::new_ppo(sd, k, &train.ppo, rng));
                m
            }
            Scheme::Mpt => vec![Learner::new_ppo(sd, k, &train.ppo, rng)],
            Scheme::Rss => vec![Learner::new_ppo(sd, n, &train.ppo, rng)],
        };
        Ok(Self { scheme, clusters: n, elements: k, members })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Per-member action dimensions.
    pub fn action_dims(&self) -> Vec<usize> {
        match self.scheme {
            Scheme::CDdpg | Scheme::CPpo => vec![self.clusters + self.elements],
            Scheme::PDdpg | Scheme::PPpo => {
                let mut d = vec![1; self.clusters];
                d.push(self.elements);
                d
            }
            Scheme::Mpt => vec![self.elements],
            Scheme::Rss => vec![self.clusters],
        }
    }

    /// Concatenate member actions into the raw `N + K` environment action,
    /// filling pinned parts: `+1` (P_max) powers for MPT, uniform random
    /// phases for RSS.
    pub fn compose(&self, actions: &[Vec<f64>], rng: &mut RngStream) -> Vec<f64> {
        let mut raw = Vec::with_capacity(self.clusters + self.elements);
        match self.scheme {
            Scheme::Mpt => {
                raw.extend(std::iter::repeat_n(1.0, self.clusters));
                raw.extend_from_slice(&actions[0]);
            }
            Scheme::Rss => {
                raw.extend_from_slice(&actions[0]);
                raw.extend(
                    (0..self.elements).map(|_| phase_to_raw(rng.uniform_range(0.0, 2.0 * std::f64::consts::PI))),
                );
            }
            _ => actions.iter().for_each(|a| raw.extend_from_slice(a)),
        }
        raw
    }

    pub fn greedy_action(&self, state: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let actions: Vec<Vec<f64>> = self.members.iter().map(|m| m.greedy(state)).collect();
        self.compose(&actions, rng)
    }

    fn exploration_level(&self) -> f64 {
        self.members.iter().map(Learner::exploration_level).sum::<f64>() / self.members.len() as f64
    }
}

/// Training loop shared by every scheme.
pub struct Trainer {
    pub env: IrsUavEnv,
    pub team: AgentTeam,
    agent_rng: RngStream,
    baseline_rng: RngStream,
    seed: u64,
}

impl Trainer {
    pub fn new(scheme: Scheme, env_cfg: EnvConfig, train: &TrainConfig) -> Result<Self> {
        let seed = env_cfg.seed;
        let mut init_rng = RngStream::with_stream(seed, streams::INIT);
        let team = AgentTeam::new(scheme, &env_cfg, train, &mut init_rng)?;
        Ok(Self {
            env: IrsUavEnv::new(env_cfg)?,
            team,
            agent_rng: RngStream::with_stream(seed, streams::AGENT),
            baseline_rng: RngStream::with_stream(seed, streams::BASELINE),
            seed,
        })
    }

    /// One training episode; returns its record.
    pub fn run_episode(&mut self, episode: usize) -> Result<EpisodeRecord> {
        let mut state = self.env.reset()?;
        let mut total = 0.0;
        let mut steps = 0usize;
        loop {
            let actions: Vec<Vec<f64>> =
                self.team.members.iter_mut().map(|m| m.explore(state.as_slice(), &mut self.agent_rng)).collect();
            let raw = self.team.compose(&actions, &mut self.baseline_rng);
            let result = self.env.step(&raw)?;
            for (member, action) in self.team.members.iter_mut().zip(actions) {
                member.observe(
                    state.as_slice(),
                    action,
                    result.reward,
                    result.next_state.as_slice(),
                    &mut self.agent_rng,
                );
            }
            total += result.reward;
            steps += 1;
            state = result.next_state;
            if result.done {
                break;
            }
        }
        Ok(EpisodeRecord { episode, mean_reward: total / steps as f64, noise_scale: self.team.exploration_level() })
    }

    pub fn run(&mut self, episodes: usize) -> Result<Trace> {
        let records = (0..episodes).map(|e| self.run_episode(e)).collect::<Result<Vec<_>>>()?;
        Ok(Trace { scheme: self.team.scheme(), seed: self.seed, records })
    }

    /// Mean reward of the greedy (noise-free) team over `episodes` fresh
    /// episodes of a separate evaluation environment.
    pub fn evaluate(&self, env_cfg: EnvConfig, episodes: usize) -> Result<f64> {
        evaluate_team(&self.team, env_cfg, episodes)
    }
}

pub fn evaluate_team(team: &AgentTeam, env_cfg: EnvConfig, episodes: usize) -> Result<f64> {
    let mut rng = RngStream::with_stream(env_cfg.seed, streams::BASELINE);
    let mut env = IrsUavEnv::new(env_cfg)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..episodes {
        let mut state = env.reset()?;
        loop {
            let raw = team.greedy_action(state.as_slice(), &mut rng);
            let r = env.step(&raw)?;
            total += r.reward;
            count += 1;
            state = r.next_state;
            if r.done {
                break;
            }
        }
    }
    Ok(total / count.max(1) as f64)
}

fn run_checked(allowed: &[Scheme], scheme: Scheme, env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    if !allowed.contains(&scheme) {
        return Err(Error::Config(format!("scheme {scheme} is not valid here")));
    }
    Trainer::new(scheme, env, train)?.run(train.episodes)
}

/// Single agent over the full `N + K` action.
pub fn run_centralised(scheme: Scheme, env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    run_checked(&[Scheme::CDdpg, Scheme::CPpo], scheme, env, train)
}

/// N power agents plus one IRS agent sharing the global reward.
pub fn run_parallel(scheme: Scheme, env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    run_checked(&[Scheme::PDdpg, Scheme::PPpo], scheme, env, train)
}

/// Maximum power at every UAV; PPO learns the phases.
pub fn run_mpt(env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    run_checked(&[Scheme::Mpt], Scheme::Mpt, env, train)
}

/// Random phases every step; PPO learns the powers.
pub fn run_rss(env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    run_checked(&[Scheme::Rss], Scheme::Rss, env, train)
}

pub fn run_scheme(scheme: Scheme, env: EnvConfig, train: &TrainConfig) -> Result<Trace> {
    Trainer::new(scheme, env, train)?.run(train.episodes)
}
