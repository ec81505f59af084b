//! Clipped-surrogate policy optimization with a diagonal Gaussian policy and
//! one-step TD advantages.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp, OutputActivation};
use crate::rng::RngStream;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub policy_lr: f64,
    pub value_lr: f64,
    pub discount: f64,
    pub clip_epsilon: f64,
    /// Environment steps collected between updates.
    pub horizon: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_log_std: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            policy_lr: 1e-5,
            value_lr: 1e-4,
            discount: 0.9,
            clip_epsilon: 0.2,
            horizon: 512,
            epochs: 10,
            batch_size: 32,
            init_log_std: 0.5f64.ln(),
            normalize_advantages: true,
            hidden: vec![128, 128],
        }
    }
}

/// `A = r + ζ·V(s') − V(s)`.
pub fn advantage(reward: f64, value: f64, next_value: f64, discount: f64) -> f64 {
    reward + discount * next_value - value
}

/// `exp(log π_new − log π_old)`.
pub fn ratio(log_prob_new: f64, log_prob_old: f64) -> f64 {
    (log_prob_new - log_prob_old).exp()
}

/// `min(p·A, clip(p, 1−ε, 1+ε)·A)`.
pub fn clipped_objective(p: f64, adv: f64, epsilon: f64) -> f64 {
    (p * adv).min(p.clamp(1.0 - epsilon, 1.0 + epsilon) * adv)
}

/// Derivative of [`clipped_objective`] with respect to `p`.
fn clipped_objective_slope(p: f64, adv: f64, epsilon: f64) -> f64 {
    let unclipped = if adv >= 0.0 { p <= 1.0 + epsilon } else { p >= 1.0 - epsilon };
    if unclipped {
        adv
    } else {
        0.0
    }
}

/// Diagonal Gaussian policy over raw actions with a tanh mean network and a
/// state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub mean: Mlp,
    log_std: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySample {
    /// Clamped to `[-1, 1]`; this is what the environment sees.
    pub action: Vec<f64>,
    /// Pre-clamp draw; log-probabilities are evaluated on this.
    pub raw: Vec<f64>,
    pub log_prob: f64,
}

fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    let half_log_2pi = 0.5 * (2.0 * PI).ln();
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), x)| {
            let z = (x - m) / ls.exp();
            -0.5 * z * z - ls - half_log_2pi
        })
        .sum()
}

impl GaussianPolicy {
    pub fn new(mean: Mlp, init_log_std: f64) -> Self {
        let dim = mean.output_dim();
        Self { mean, log_std: vec![init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX); dim] }
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn set_log_std(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.log_std.len());
        for (d, v) in self.log_std.iter_mut().zip(values) {
            *d = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean_std(&self) -> f64 {
        self.log_std.iter().map(|l| l.exp()).sum::<f64>() / self.log_std.len() as f64
    }

    pub fn log_prob(&self, state: &[f64], raw: &[f64]) -> f64 {
        gaussian_log_prob(&self.mean.forward(state), &self.log_std, raw)
    }

    pub fn sample(&self, state: &[f64], rng: &mut RngStream) -> PolicySample {
        let mean = self.mean.forward(state);
        let raw: Vec<f64> =
            mean.iter().zip(&self.log_std).map(|(m, ls)| m + ls.exp() * rng.standard_normal()).collect();
        let log_prob = gaussian_log_prob(&mean, &self.log_std, &raw);
        let action = raw.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        PolicySample { action, raw, log_prob }
    }

    /// Mean action, clamped.
    pub fn greedy(&self, state: &[f64]) -> Vec<f64> {
        self.mean.forward(state).into_iter().map(|v| v.clamp(-1.0, 1.0)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutEntry {
    pub state: Vec<f64>,
    /// Pre-clamp action.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub log_prob: f64,
}

/// On-policy storage for one collection phase.
#[derive(Clone, Debug, Default)]
pub struct RolloutBuffer {
    entries: Vec<RolloutEntry>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: RolloutEntry) {
        self.entries.push(e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RolloutEntry] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PpoStats {
    /// Mean clipped surrogate over the rollout before the update.
    pub surrogate: f64,
    /// Mean squared TD error before the update.
    pub value_loss: f64,
    /// Fraction of post-update ratios inside `[1−ε, 1+ε]`.
    pub ratio_in_band: f64,
}

#[derive(Clone, Debug)]
pub struct PpoAgent {
    cfg: PpoConfig,
    state_dim: usize,
    pub policy: GaussianPolicy,
    pub value: Mlp,
    mean_opt: AdamState,
    log_std_opt: AdamState,
    value_opt: AdamState,
}

impl PpoAgent {
    pub fn new(state_dim: usize, action_dim: usize, cfg: PpoConfig, rng: &mut RngStream) -> Self {
        let mut policy_sizes = vec![state_dim];
        policy_sizes.extend(&cfg.hidden);
        policy_sizes.push(action_dim);
        let mut value_sizes = vec![state_dim];
        value_sizes.extend(&cfg.hidden);
        value_sizes.push(1);
        let mean = Mlp::new(&policy_sizes, OutputActivation::Tanh, 1e-3, rng);
        let value = Mlp::new(&value_sizes, OutputActivation::Identity, 1.0, rng);
        Self {
            mean_opt: AdamState::new(mean.num_params(), cfg.policy_lr),
            log_std_opt: AdamState::new(action_dim, cfg.policy_lr),
            value_opt: AdamState::new(value.num_params(), cfg.value_lr),
            policy: GaussianPolicy::new(mean, cfg.init_log_std),
            value,
            state_dim,
            cfg,
        }
    }

    pub fn config(&self) -> &PpoConfig {
        &self.cfg
    }

    pub fn act(&self, state: &[f64], rng: &mut RngStream) -> PolicySample {
        self.policy.sample(state, rng)
    }

    pub fn state_value(&self, state: &[f64]) -> f64 {
        self.value.forward(state)[0]
    }

    /// One-step TD advantages for every entry under the current value net.
    pub fn advantages(&self, entries: &[RolloutEntry]) -> Vec<f64> {
        let n = entries.len();
        let s: Vec<f64> = entries.iter().flat_map(|e| e.state.iter().copied()).collect();
        let s2: Vec<f64> = entries.iter().flat_map(|e| e.next_state.iter().copied()).collect();
        let v = self.value.forward_batch(&s, n).into_output();
        let v2 = self.value.forward_batch(&s2, n).into_output();
        entries.iter().enumerate().map(|(i, e)| advantage(e.reward, v[i], v2[i], self.cfg.discount)).collect()
    }

    /// Probability ratio of `entry` under the current policy.
    pub fn ratio(&self, entry: &RolloutEntry) -> f64 {
        ratio(self.policy.log_prob(&entry.state, &entry.action), entry.log_prob)
    }

    /// Mean clipped objective over `entries` with the given advantages.
    pub fn surrogate(&self, entries: &[RolloutEntry], advantages: &[f64]) -> f64 {
        let eps = self.cfg.clip_epsilon;
        entries.iter().zip(advantages).map(|(e, &a)| clipped_objective(self.ratio(e), a, eps)).sum::<f64>()
            / entries.len() as f64
    }

    pub fn value_loss(&self, entries: &[RolloutEntry]) -> f64 {
        self.advantages(entries).iter().map(|a| a * a).sum::<f64>() / entries.len() as f64
    }

    /// Gradient of the mean clipped surrogate over `batch` with respect to
    /// the mean-network parameters and the log standard deviations.
    pub fn surrogate_gradient(&self, batch: &[&RolloutEntry], adv: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let b = batch.len();
        let adim = self.policy.log_std.len();
        let s: Vec<f64> = batch.iter().flat_map(|e| e.state.iter().copied()).collect();
        let tape = self.policy.mean.forward_batch(&s, b);
        let means = tape.output();
        let stds: Vec<f64> = self.policy.log_std.iter().map(|l| l.exp()).collect();
        let mut d_mean = vec![0.0; b * adim];
        let mut d_log_std = vec![0.0; adim];
        for (i, e) in batch.iter().enumerate() {
            let mu = &means[i * adim..(i + 1) * adim];
            let lp = gaussian_log_prob(mu, &self.policy.log_std, &e.action);
            let p = ratio(lp, e.log_prob);
            // d objective / d log π = slope · p
            let coef = clipped_objective_slope(p, adv[i], self.cfg.clip_epsilon) * p / b as f64;
            if coef == 0.0 {
                continue;
            }
            for d in 0..adim {
                let z = (e.action[d] - mu[d]) / stds[d];
                d_mean[i * adim + d] = coef * z / stds[d];
                d_log_std[d] += coef * (z * z - 1.0);
            }
        }
        let (grads, _) = self.policy.mean.backward(&tape, &d_mean);
        (grads, d_log_std)
    }

    fn policy_step(&mut self, batch: &[&RolloutEntry], adv: &[f64]) {
        let (mut grads, mut d_log_std) = self.surrogate_gradient(batch, adv);
        grads.iter_mut().chain(d_log_std.iter_mut()).for_each(|g| *g = -*g);
        self.mean_opt.step(self.policy.mean.params_mut(), &grads);
        self.log_std_opt.step(&mut self.policy.log_std, &d_log_std);
        for l in &mut self.policy.log_std {
            *l = l.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    /// Semi-gradient descent on `(r + ζV(s') − V(s))²`, target held fixed.
    fn value_step(&mut self, batch: &[&RolloutEntry]) {
        let b = batch.len();
        let s: Vec<f64> = batch.iter().flat_map(|e| e.state.iter().copied()).collect();
        let s2: Vec<f64> = batch.iter().flat_map(|e| e.next_state.iter().copied()).collect();
        let next = self.value.forward_batch(&s2, b).into_output();
        let tape = self.value.forward_batch(&s, b);
        let seed: Vec<f64> = batch
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let target = e.reward + self.cfg.discount * next[i];
                -2.0 * (target - tape.output()[i]) / b as f64
            })
            .collect();
        let (grads, _) = self.value.backward(&tape, &seed);
        self.value_opt.step(self.value.params_mut(), &grads);
    }

    /// `epochs` passes of shuffled mini-batch updates over the rollout, then
    /// clear it. `None` for an empty rollout.
    pub fn update(&mut self, rollout: &mut RolloutBuffer, rng: &mut RngStream) -> Option<PpoStats> {
        if rollout.is_empty() {
            return None;
        }
        let entries = std::mem::take(&mut rollout.entries);
        let mut adv = self.advantages(&entries);
        let value_loss = adv.iter().map(|a| a * a).sum::<f64>() / adv.len() as f64;
        if self.cfg.normalize_advantages && adv.len() > 1 {
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            if std > 1e-12 {
                adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
            }
        }
        let surrogate = self.surrogate(&entries, &adv);

        let mut order: Vec<usize> = (0..entries.len()).collect();
        let bs = self.cfg.batch_size.max(1);
        for _ in 0..self.cfg.epochs {
            rng.shuffle(&mut order);
            for chunk in order.chunks(bs) {
                let batch: Vec<&RolloutEntry> = chunk.iter().map(|&i| &entries[i]).collect();
                let batch_adv: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
                self.policy_step(&batch, &batch_adv);
                self.value_step(&batch);
            }
        }
        let eps = self.cfg.clip_epsilon;
        let inside = entries.iter().filter(|e| (1.0 - eps..=1.0 + eps).contains(&self.ratio(e))).count();
        Some(PpoStats { surrogate, value_loss, ratio_in_band: inside as f64 / entries.len() as f64 })
    }

    /// Layout: `b"IRSPPO01"`, u64 action dim, f64 × dim log-std, policy mean
    /// MLP, value MLP, then the mean, log-std and value Adam records.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"IRSPPO01")?;
        w.write_all(&(self.policy.log_std.len() as u64).to_le_bytes())?;
        for l in &self.policy.log_std {
            w.write_all(&l.to_le_bytes())?;
        }
        self.policy.mean.write_to(w)?;
        self.value.write_to(w)?;
        self.mean_opt.write_to(w)?;
        self.log_std_opt.write_to(w)?;
        self.value_opt.write_to(w)
    }

    pub fn load(&mut self, r: &mut impl Read) -> Result<()> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"IRSPPO01" {
            return Err(Error::Checkpoint("not a PPO checkpoint".into()));
        }
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let dim = u64::from_le_bytes(buf) as usize;
        if dim != self.policy.log_std.len() {
            return Err(Error::Checkpoint("action dimension does not match this agent".into()));
        }
        let mut log_std = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut buf)?;
            log_std.push(f64::from_le_bytes(buf));
        }
        let mean = Mlp::read_from(r)?;
        let value = Mlp::read_from(r)?;
        if mean.sizes() != self.policy.mean.sizes() || value.sizes() != self.value.sizes() {
            return Err(Error::Checkpoint("network shapes do not match this agent".into()));
        }
        self.mean_opt = AdamState::read_from(r)?;
        self.log_std_opt = AdamState::read_from(r)?;
        self.value_opt = AdamState::read_from(r)?;
        self.policy.mean = mean;
        self.policy.log_std = log_std;
        self.value = value;
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }
}
