//! Deterministic-policy actor-critic with experience replay and soft-updated
//! target networks.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, soft_update, AdamState, Mlp, OutputActivation};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Discount ζ.
    pub discount: f64,
    /// Soft-update mixing ϰ.
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Initial exploration noise ψ, in raw action units.
    pub noise_scale: f64,
    /// Per-step multiplicative decay of the noise scale.
    pub noise_decay: f64,
    pub hidden: Vec<usize>,
    /// Global-norm gradient clip for both networks; `None` disables it.
    pub grad_clip: Option<f64>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-3,
            critic_lr: 2e-3,
            discount: 0.9,
            tau: 0.01,
            batch_size: 32,
            replay_capacity: 100_000,
            noise_scale: 3.0,
            noise_decay: 0.99995,
            hidden: vec![128, 128],
            grad_clip: Some(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Fixed-capacity ring buffer; once full, each push overwrites the oldest entry.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(4096)), cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Slot indices of a uniform sample with replacement.
    pub fn sample_indices(&self, count: usize, rng: &mut RngStream) -> Vec<usize> {
        assert!(!self.items.is_empty(), "sampling from an empty buffer");
        (0..count).map(|_| rng.index(self.items.len())).collect()
    }

    pub fn sample(&self, count: usize, rng: &mut RngStream) -> Vec<&Transition> {
        self.sample_indices(count, rng).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdpgStats {
    /// Critic loss on the batch before the update.
    pub critic_loss: f64,
    /// Mean `Q(s, μ(s))` over the batch before the actor update.
    pub actor_q: f64,
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    cfg: DdpgConfig,
    state_dim: usize,
    action_dim: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    noise_scale: f64,
}

fn concat_rows(a: &[f64], a_dim: usize, b: &[f64], b_dim: usize, rows: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * (a_dim + b_dim));
    for r in 0..rows {
        out.extend_from_slice(&a[r * a_dim..(r + 1) * a_dim]);
        out.extend_from_slice(&b[r * b_dim..(r + 1) * b_dim]);
    }
    out
}

impl DdpgAgent {
    pub fn new(state_dim: usize, action_dim: usize, cfg: DdpgConfig, rng: &mut RngStream) -> Self {
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, OutputActivation::Tanh, 1e-3, rng);
        let critic = Mlp::new(&critic_sizes, OutputActivation::Identity, 1.0, rng);
        Self {
            actor_opt: AdamState::new(actor.num_params(), cfg.actor_lr),
            critic_opt: AdamState::new(critic.num_params(), cfg.critic_lr),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            noise_scale: cfg.noise_scale,
            state_dim,
            action_dim,
            cfg,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn set_noise_scale(&mut self, scale: f64) {
        self.noise_scale = scale.max(0.0);
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Greedy action `μ(s)`.
    pub fn act(&self, state: &[f64]) -> Vec<f64> {
        self.actor.forward(state)
    }

    /// `μ(s) + ψ·N(0, 1)` per dimension, clamped to `[-1, 1]`; ψ then decays.
    pub fn act_with_noise(&mut self, state: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let mut a = self.act(state);
        if self.noise_scale > 0.0 {
            for v in &mut a {
                *v = (*v + self.noise_scale * rng.standard_normal()).clamp(-1.0, 1.0);
            }
        }
        self.noise_scale *= self.cfg.noise_decay;
        a
    }

    fn stack(&self, batch: &[&Transition]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut s = Vec::with_capacity(batch.len() * self.state_dim);
        let mut a = Vec::with_capacity(batch.len() * self.action_dim);
        let mut r = Vec::with_capacity(batch.len());
        let mut s2 = Vec::with_capacity(batch.len() * self.state_dim);
        for t in batch {
            s.extend_from_slice(&t.state);
            a.extend_from_slice(&t.action);
            r.push(t.reward);
            s2.extend_from_slice(&t.next_state);
        }
        (s, a, r, s2)
    }

    /// `y = r + ζ·Q'(s', μ'(s'))` for each transition.
    pub fn critic_targets(&self, batch: &[&Transition]) -> Vec<f64> {
        let (_, _, r, s2) = self.stack(batch);
        let d = batch.len();
        let a2 = self.actor_target.forward_batch(&s2, d).into_output();
        let q2 = self.critic_target.forward_batch(&concat_rows(&s2, self.state_dim, &a2, self.action_dim, d), d);
        r.iter().zip(q2.output()).map(|(r, q)| r + self.cfg.discount * q).collect()
    }

    /// Mean squared TD error of the online critic against the target networks.
    pub fn critic_loss(&self, batch: &[&Transition]) -> f64 {
        let (s, a, _, _) = self.stack(batch);
        let y = self.critic_targets(batch);
        let d = batch.len();
        let q = self.critic.forward_batch(&concat_rows(&s, self.state_dim, &a, self.action_dim, d), d);
        q.output().iter().zip(&y).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / d as f64
    }

    /// `J = mean_i critic(s_i, μ(s_i))` and `∇_θμ J`, chaining the critic's
    /// action gradient into the actor.
    pub fn actor_objective_gradient(&self, states: &[f64], critic: &Mlp) -> (f64, Vec<f64>) {
        let d = states.len() / self.state_dim;
        let actor_tape = self.actor.forward_batch(states, d);
        let critic_in = concat_rows(states, self.state_dim, actor_tape.output(), self.action_dim, d);
        let critic_tape = critic.forward_batch(&critic_in, d);
        let j = critic_tape.output().iter().sum::<f64>() / d as f64;
        let dq = critic.backward_input(&critic_tape, &vec![1.0 / d as f64; d]);
        let width = self.state_dim + self.action_dim;
        let mut da = Vec::with_capacity(d * self.action_dim);
        for row in dq.chunks_exact(width) {
            da.extend_from_slice(&row[self.state_dim..]);
        }
        let (grads, _) = self.actor.backward(&actor_tape, &da);
        (j, grads)
    }

    /// One critic descent step, one actor ascent step and one soft update of
    /// both targets on the given mini-batch.
    pub fn update_on_batch(&mut self, batch: &[&Transition]) -> DdpgStats {
        let d = batch.len();
        let (s, a, _, _) = self.stack(batch);
        let y = self.critic_targets(batch);

        let tape = self.critic.forward_batch(&concat_rows(&s, self.state_dim, &a, self.action_dim, d), d);
        let mut critic_loss = 0.0;
        let mut seed = Vec::with_capacity(d);
        for (q, y) in tape.output().iter().zip(&y) {
            critic_loss += (y - q).powi(2);
            seed.push(2.0 * (q - y) / d as f64);
        }
        critic_loss /= d as f64;
        let (mut grads, _) = self.critic.backward(&tape, &seed);
        if let Some(c) = self.cfg.grad_clip {
            clip_global_norm(&mut grads, c);
        }
        self.critic_opt.step(self.critic.params_mut(), &grads);

        let (actor_q, mut grads) = self.actor_objective_gradient(&s, &self.critic);
        grads.iter_mut().for_each(|g| *g = -*g);
        if let Some(c) = self.cfg.grad_clip {
            clip_global_norm(&mut grads, c);
        }
        self.actor_opt.step(self.actor.params_mut(), &grads);

        soft_update(self.critic_target.params_mut(), self.critic.params(), self.cfg.tau);
        soft_update(self.actor_target.params_mut(), self.actor.params(), self.cfg.tau);
        DdpgStats { critic_loss, actor_q }
    }

    /// Sample a mini-batch and update. `None` while the buffer holds fewer
    /// than `batch_size` transitions.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, rng: &mut RngStream) -> Option<DdpgStats> {
        if buffer.len() < self.cfg.batch_size {
            return None;
        }
        let batch = buffer.sample(self.cfg.batch_size, rng);
        Some(self.update_on_batch(&batch))
    }

    /// Networks, optimizer state and noise scale. Layout: `b"IRSDDPG1"`,
    /// f64 noise scale, then actor, critic, actor target, critic target
    /// (MLP records) and the actor and critic Adam records.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(b"IRSDDPG1")?;
        w.write_all(&self.noise_scale.to_le_bytes())?;
        for net in [&self.actor, &self.critic, &self.actor_target, &self.critic_target] {
            net.write_to(w)?;
        }
        self.actor_opt.write_to(w)?;
        self.critic_opt.write_to(w)
    }

    pub fn load(&mut self, r: &mut impl Read) -> Result<()> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != b"IRSDDPG1" {
            return Err(Error::Checkpoint("not a DDPG checkpoint".into()));
        }
        let mut f = [0u8; 8];
        r.read_exact(&mut f)?;
        let noise = f64::from_le_bytes(f);
        let nets = [Mlp::read_from(r)?, Mlp::read_from(r)?, Mlp::read_from(r)?, Mlp::read_from(r)?];
        if nets[0].sizes() != self.actor.sizes() || nets[1].sizes() != self.critic.sizes() {
            return Err(Error::Checkpoint("network shapes do not match this agent".into()));
        }
        let actor_opt = AdamState::read_from(r)?;
        let critic_opt = AdamState::read_from(r)?;
        let [actor, critic, actor_target, critic_target] = nets;
        self.actor = actor;
        self.critic = critic;
        self.actor_target = actor_target;
        self.critic_target = critic_target;
        self.actor_opt = actor_opt;
        self.critic_opt = critic_opt;
        self.noise_scale = noise;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(i: usize, sd: usize, ad: usize) -> Transition {
        let x = i as f64;
        Transition {
            state: (0..sd).map(|j| (x + j as f64).sin()).collect(),
            action: (0..ad).map(|j| (0.3 * x - j as f64).cos() * 0.9).collect(),
            reward: (0.7 * x).sin() + 1.0,
            next_state: (0..sd).map(|j| (x + 1.0 + j as f64).sin()).collect(),
        }
    }

    fn small_cfg() -> DdpgConfig {
        DdpgConfig { hidden: vec![16, 16], ..DdpgConfig::default() }
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..4 {
            b.push(transition(i, 2, 1));
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = b.iter().map(|t| t.reward).collect();
        let want: Vec<f64> = (1..4).map(|i| transition(i, 2, 1).reward).collect();
        assert_eq!(rewards, want);
    }

    #[test]
    fn eviction_keeps_most_recent_capacity() {
        let mut b = ReplayBuffer::new(7);
        for i in 0..40 {
            b.push(transition(i, 1, 1));
            let start = (i + 1).saturating_sub(7);
            let want: Vec<Transition> = (start..=i).map(|j| transition(j, 1, 1)).collect();
            let got: Vec<Transition> = b.iter().cloned().collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sampling_single_item() {
        let mut b = ReplayBuffer::new(10);
        b.push(transition(5, 2, 2));
        let s = b.sample(4, &mut RngStream::new(0));
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|t| **t == transition(5, 2, 2)));
    }

    #[test]
    fn noiseless_action_is_actor_output() {
        let mut rng = RngStream::new(1);
        let mut agent = DdpgAgent::new(4, 3, small_cfg(), &mut rng);
        agent.set_noise_scale(0.0);
        let s = [0.1, -0.3, 0.5, 0.2];
        assert_eq!(agent.act_with_noise(&s, &mut rng), agent.act(&s));
        // fresh actor sits near the action-space center
        assert!(agent.act(&s).iter().all(|a| a.abs() < 0.05));
    }

    #[test]
    fn noise_decays_geometrically() {
        let mut rng = RngStream::new(2);
        let mut agent = DdpgAgent::new(2, 1, small_cfg(), &mut rng);
        for _ in 0..10_000 {
            let a = agent.act_with_noise(&[0.0, 0.0], &mut rng);
            assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        let want = 3.0 * 0.99995f64.powi(10_000);
        assert!((agent.noise_scale() - want).abs() < 1e-9);
        assert!((agent.noise_scale() - 1.820).abs() < 1e-3);
    }

    #[test]
    fn critic_target_reduces_to_reward_at_zero_discount() {
        let mut rng = RngStream::new(3);
        let agent = DdpgAgent::new(3, 2, DdpgConfig { discount: 0.0, ..small_cfg() }, &mut rng);
        let batch: Vec<Transition> = (0..5).map(|i| transition(i, 3, 2)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = agent.critic_targets(&refs);
        for (y, t) in y.iter().zip(&batch) {
            assert_eq!(*y, t.reward);
        }
    }

    #[test]
    fn critic_target_with_constant_target_critic() {
        let mut rng = RngStream::new(4);
        let mut agent = DdpgAgent::new(3, 2, small_cfg(), &mut rng);
        // zero weights and bias 2.5 on the last layer: Q' ≡ 2.5
        let n = agent.critic_target.num_params();
        let last = 16 + 1;
        for p in &mut agent.critic_target.params_mut()[n - last..] {
            *p = 0.0;
        }
        agent.critic_target.params_mut()[n - 1] = 2.5;
        let batch: Vec<Transition> = (0..4).map(|i| transition(i, 3, 2)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        for (y, t) in agent.critic_targets(&refs).iter().zip(&batch) {
            assert!((y - (t.reward + 0.9 * 2.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn critic_targets_and_loss_match_scalar_oracle() {
        let mut rng = RngStream::new(5);
        let agent = DdpgAgent::new(3, 2, small_cfg(), &mut rng);
        let batch: Vec<Transition> = (0..6).map(|i| transition(i, 3, 2)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = agent.critic_targets(&refs);
        let mut loss = 0.0;
        for (t, yi) in batch.iter().zip(&y) {
            let a2 = agent.actor_target.forward(&t.next_state);
            let q2 = agent.critic_target.forward(&[t.next_state.clone(), a2].concat())[0];
            let want = t.reward + 0.9 * q2;
            assert!((yi - want).abs() <= 1e-12 * want.abs().max(1.0));
            let q = agent.critic.forward(&[t.state.clone(), t.action.clone()].concat())[0];
            loss += (want - q).powi(2);
        }
        loss /= 6.0;
        let got = agent.critic_loss(&refs);
        assert!((got - loss).abs() <= 1e-12 * loss.max(1.0));
    }

    #[test]
    fn perfect_critic_has_zero_loss_and_stays_put() {
        let mut rng = RngStream::new(6);
        let mut agent = DdpgAgent::new(2, 1, DdpgConfig { discount: 0.0, ..small_cfg() }, &mut rng);
        // Q ≡ c and every reward equals c
        let n = agent.critic.num_params();
        for p in &mut agent.critic.params_mut()[n - 17..] {
            *p = 0.0;
        }
        agent.critic.params_mut()[n - 1] = 1.25;
        let batch: Vec<Transition> = (0..8).map(|i| Transition { reward: 1.25, ..transition(i, 2, 1) }).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let before = agent.critic.clone();
        let stats = agent.update_on_batch(&refs);
        assert_eq!(stats.critic_loss, 0.0);
        assert_eq!(agent.critic.params(), before.params());
    }

    #[test]
    fn full_mixing_copies_online_into_targets() {
        let mut rng = RngStream::new(7);
        let mut agent = DdpgAgent::new(3, 2, DdpgConfig { tau: 1.0, ..small_cfg() }, &mut rng);
        let batch: Vec<Transition> = (0..8).map(|i| transition(i, 3, 2)).collect();
        agent.update_on_batch(&batch.iter().collect::<Vec<_>>());
        assert_eq!(agent.actor_target.params(), agent.actor.params());
        assert_eq!(agent.critic_target.params(), agent.critic.params());
    }

    #[test]
    fn underfull_buffer_skips() {
        let mut rng = RngStream::new(8);
        let mut agent = DdpgAgent::new(2, 1, small_cfg(), &mut rng);
        let mut buf = ReplayBuffer::new(100);
        for i in 0..31 {
            buf.push(transition(i, 2, 1));
        }
        let before = agent.actor.clone();
        assert!(agent.train_step(&buf, &mut rng).is_none());
        assert_eq!(agent.actor, before);
        buf.push(transition(31, 2, 1));
        assert!(agent.train_step(&buf, &mut rng).is_some());
    }

    #[test]
    fn actor_gradient_through_sum_critic_matches_finite_differences() {
        let mut rng = RngStream::new(9);
        let (sd, ad) = (3, 2);
        let agent = DdpgAgent::new(sd, ad, DdpgConfig { hidden: vec![8, 8], ..DdpgConfig::default() }, &mut rng);
        // Q(s, a) = Σ a
        let mut p = vec![0.0; sd + ad + 1];
        for w in &mut p[sd..sd + ad] {
            *w = 1.0;
        }
        let critic = Mlp::from_params(&[sd + ad, 1], OutputActivation::Identity, p).unwrap();
        let states: Vec<f64> = (0..4 * sd).map(|_| rng.normal(0.0, 1.0)).collect();
        let (_, grads) = agent.actor_objective_gradient(&states, &critic);
        let objective = |actor: &Mlp| actor.forward_batch(&states, 4).output().iter().sum::<f64>() / 4.0;
        let mut probe = agent.actor.clone();
        let h = 1e-6;
        for i in 0..probe.num_params() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = objective(&probe);
            probe.params_mut()[i] = orig - h;
            let down = objective(&probe);
            probe.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(crate::nn::gradcheck::relative_error(grads[i], fd) < 1e-4, "param {i}: {} vs {fd}", grads[i]);
        }
    }

    #[test]
    fn critic_loss_nonincreasing_against_frozen_targets() {
        let mut rng = RngStream::new(10);
        let cfg = DdpgConfig { tau: 0.0, critic_lr: 1e-4, grad_clip: None, ..small_cfg() };
        let mut agent = DdpgAgent::new(3, 2, cfg, &mut rng);
        let batch: Vec<Transition> = (0..32).map(|i| transition(i, 3, 2)).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let mut prev = agent.critic_loss(&refs);
        for _ in 0..100 {
            agent.update_on_batch(&refs);
            let now = agent.critic_loss(&refs);
            assert!(now <= prev + 1e-12, "{now} > {prev}");
            prev = now;
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = RngStream::new(11);
        let mut agent = DdpgAgent::new(3, 2, small_cfg(), &mut rng);
        let batch: Vec<Transition> = (0..8).map(|i| transition(i, 3, 2)).collect();
        agent.update_on_batch(&batch.iter().collect::<Vec<_>>());
        let mut buf = Vec::new();
        agent.save(&mut buf).unwrap();
        let mut other = DdpgAgent::new(3, 2, small_cfg(), &mut RngStream::new(99));
        other.load(&mut buf.as_slice()).unwrap();
        assert_eq!(other.actor, agent.actor);
        assert_eq!(other.critic_target, agent.critic_target);
        assert_eq!(other.noise_scale(), agent.noise_scale());
        let mut wrong = DdpgAgent::new(4, 2, small_cfg(), &mut rng);
        assert!(wrong.load(&mut buf.as_slice()).is_err());
    }
}
