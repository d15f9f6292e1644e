//! TD3 and DDPG over one-step latent refinement episodes.
//!
//! Both agents share every piece of machinery; DDPG is TD3 with a single
//! critic, no target policy smoothing and a policy delay of one.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{s, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autoencoder::Gfv;
use crate::diff::{adam_step, load_checkpoint, save_checkpoint, Activation, AdamConfig, AdamState, Mlp};
use crate::error::{Error, Result};
use crate::refiner::buffer::{ReplayBuffer, Transition};
use crate::refiner::curves::CurveRow;
use crate::refiner::env::{apply_action, clamp_action, LatentEnv, RefineEnvConfig};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Td3,
    Ddpg,
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "td3" => Ok(AgentKind::Td3),
            "ddpg" => Ok(AgentKind::Ddpg),
            other => Err(Error::invalid(format!("unknown agent `{other}` (expected td3 or ddpg)"))),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Td3 => "td3",
            AgentKind::Ddpg => "ddpg",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Td3Config {
    pub agent: AgentKind,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    /// Polyak coefficient for target networks.
    pub tau: f64,
    pub policy_delay: usize,
    /// Std-dev of Gaussian exploration noise, in action units.
    pub exploration_sigma: f64,
    /// Target smoothing noise std-dev, as a fraction of the action bound.
    pub target_noise: f64,
    /// Target smoothing noise clip, as a fraction of the action bound.
    pub target_noise_clip: f64,
    pub iterations: usize,
    /// Iterations that act uniformly at random before the policy is used.
    pub warmup: usize,
    pub buffer_capacity: usize,
    /// Hidden widths shared by actor and critics.
    pub hidden: Vec<usize>,
    pub twin_critics: bool,
    pub target_smoothing: bool,
}

impl Default for Td3Config {
    fn default() -> Self {
        Self::paper()
    }
}

impl Td3Config {
    pub fn paper() -> Self {
        Self {
            agent: AgentKind::Td3,
            batch_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            discount: 0.99,
            tau: 0.005,
            policy_delay: 2,
            exploration_sigma: 0.1,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            iterations: 100_000,
            warmup: 1_000,
            buffer_capacity: ReplayBuffer::<f32>::DEFAULT_CAPACITY,
            hidden: vec![350, 350],
            twin_critics: true,
            target_smoothing: true,
        }
    }

    /// The `paper()` profile cut to a few thousand iterations for laptop runs.
    pub fn desk() -> Self {
        Self {
            iterations: 3_000,
            warmup: 300,
            ..Self::paper()
        }
    }

    /// The same settings with DDPG's single critic, no smoothing and no delay.
    pub fn as_ddpg(&self) -> Self {
        Self {
            agent: AgentKind::Ddpg,
            twin_critics: false,
            target_smoothing: false,
            policy_delay: 1,
            ..self.clone()
        }
    }

    /// Resolves the knobs implied by `agent`.
    pub fn resolved(&self) -> Self {
        match self.agent {
            AgentKind::Td3 => self.clone(),
            AgentKind::Ddpg => self.as_ddpg(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.policy_delay == 0 {
            return Err(Error::invalid("policy delay must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::invalid("batch size must be positive and fit in the replay buffer"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::invalid("actor/critic hidden widths must be non-empty and positive"));
        }
        Ok(())
    }
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut w = vec![input];
    w.extend_from_slice(hidden);
    w.push(output);
    w
}

fn hidden_acts(hidden: &[usize], last: Activation) -> Vec<Activation> {
    let mut a = vec![Activation::Relu; hidden.len()];
    a.push(last);
    a
}

pub fn actor_param_count(state_dim: usize, action_dim: usize, hidden: &[usize]) -> usize {
    widths(state_dim, hidden, action_dim).windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

pub fn critic_param_count(state_dim: usize, action_dim: usize, hidden: &[usize]) -> usize {
    widths(state_dim + action_dim, hidden, 1).windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Deterministic refinement policy: `a = bound * tanh(actor(z))`.
#[derive(Debug, Clone)]
pub struct Policy<T> {
    pub actor: Mlp<T>,
    pub action_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct PolicySidecar {
    td3: Td3Config,
    action_bound: f64,
}

impl<T: Real> Policy<T> {
    pub fn act(&self, state: &[T]) -> Result<Vec<T>> {
        let b = T::of(self.action_bound);
        let raw = self.actor.infer_one(state)?;
        Ok(clamp_action(&raw.into_iter().map(|v| v * b).collect::<Vec<_>>(), self.action_bound))
    }

    /// Writes the actor checkpoint at `path` and a one-line JSON sidecar at
    /// `<path>.json`.
    pub fn save(&self, path: &Path, config: &Td3Config) -> Result<()> {
        save_checkpoint(&self.actor, path)?;
        let side = sidecar_path(path);
        let json = serde_json::to_string(&PolicySidecar {
            td3: config.clone(),
            action_bound: self.action_bound,
        })?;
        fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
    }

    pub fn load(path: &Path) -> Result<(Self, Td3Config)> {
        let side = sidecar_path(path);
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let meta: PolicySidecar = serde_json::from_str(&text)?;
        let actor: Mlp<T> = load_checkpoint(path, None)?;
        if actor.input_dim() != actor.output_dim() {
            return Err(Error::invalid("policy actor must map a latent to an equally sized action"));
        }
        let expected = widths(actor.input_dim(), &meta.td3.hidden, actor.output_dim());
        let got: Vec<usize> = std::iter::once(actor.input_dim())
            .chain(actor.shapes().iter().map(|s| s.1))
            .collect();
        if expected != got {
            return Err(Error::invalid(format!(
                "actor checkpoint widths {got:?} disagree with sidecar {expected:?}"
            )));
        }
        Ok((
            Policy {
                actor,
                action_bound: meta.action_bound,
            },
            meta.td3,
        ))
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// `z' = z + alpha * clamp(actor(z))`, without exploration noise.
pub fn refine<T: Real>(policy: &Policy<T>, z: &Gfv<T>, env_cfg: &RefineEnvConfig) -> Result<Gfv<T>> {
    let a = policy.act(z.as_slice())?;
    apply_action(z, &a, env_cfg)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    pub critic_updates: usize,
    pub actor_updates: usize,
    /// Mean squared TD error of the first critic at every critic update.
    pub critic_losses: Vec<f64>,
    /// `-mean Q1(s, pi(s))` at every actor update.
    pub actor_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub policy: Policy<T>,
    pub curves: Vec<CurveRow>,
    pub stats: TrainStats,
}

struct Critic<T> {
    online: Mlp<T>,
    target: Mlp<T>,
    opt: AdamState<T>,
}

/// Actor, critics and their targets plus optimiser state.
pub struct Agent<T> {
    cfg: Td3Config,
    action_bound: f64,
    state_dim: usize,
    action_dim: usize,
    actor: Mlp<T>,
    actor_target: Mlp<T>,
    actor_opt: AdamState<T>,
    critics: Vec<Critic<T>>,
    noise_rng: ChaCha8Rng,
    pub stats: TrainStats,
}

impl<T: Real> Agent<T> {
    /// Networks are seeded from independent streams so that switching the
    /// second critic on or off leaves the actor and first critic unchanged.
    pub fn new(state_dim: usize, action_dim: usize, action_bound: f64, cfg: &Td3Config, seed: u64) -> Result<Self> {
        let cfg = cfg.resolved();
        cfg.validate()?;
        let actor = Mlp::random(
            &widths(state_dim, &cfg.hidden, action_dim),
            &hidden_acts(&cfg.hidden, Activation::Tanh),
            seed.wrapping_add(11),
        )?;
        let n_critics = if cfg.twin_critics { 2 } else { 1 };
        let critics = (0..n_critics)
            .map(|k| {
                let online = Mlp::random(
                    &widths(state_dim + action_dim, &cfg.hidden, 1),
                    &hidden_acts(&cfg.hidden, Activation::None),
                    seed.wrapping_add(23 + k as u64),
                )?;
                Ok(Critic {
                    target: online.clone(),
                    opt: AdamState::new(&online, AdamConfig::constant(cfg.critic_lr)),
                    online,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            action_bound,
            state_dim,
            action_dim,
            actor_target: actor.clone(),
            actor_opt: AdamState::new(&actor, AdamConfig::constant(cfg.actor_lr)),
            actor,
            critics,
            noise_rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(37)),
            cfg,
            stats: TrainStats::default(),
        })
    }

    pub fn config(&self) -> &Td3Config {
        &self.cfg
    }

    pub fn actor(&self) -> &Mlp<T> {
        &self.actor
    }

    pub fn actor_target(&self) -> &Mlp<T> {
        &self.actor_target
    }

    pub fn critic(&self, k: usize) -> &Mlp<T> {
        &self.critics[k].online
    }

    pub fn critic_target(&self, k: usize) -> &Mlp<T> {
        &self.critics[k].target
    }

    pub fn num_critics(&self) -> usize {
        self.critics.len()
    }

    pub fn policy(&self) -> Policy<T> {
        Policy {
            actor: self.actor.clone(),
            action_bound: self.action_bound,
        }
    }

    fn scaled_actor(&self, net: &Mlp<T>, states: &Array2<T>) -> Result<Array2<T>> {
        let b = T::of(self.action_bound);
        Ok(net.infer(states.view())?.mapv(|v| v * b))
    }

    /// Action used while collecting experience: policy output plus Gaussian
    /// noise, clamped to the bound.
    pub fn explore(&mut self, state: &[T], iteration: usize) -> Result<Vec<T>> {
        let bound = self.action_bound;
        if iteration < self.cfg.warmup {
            return Ok((0..self.action_dim)
                .map(|_| T::of(self.noise_rng.random_range(-bound..=bound)))
                .collect());
        }
        let b = T::of(bound);
        let mut a: Vec<T> = self.actor.infer_one(state)?.into_iter().map(|v| v * b).collect();
        if self.cfg.exploration_sigma > 0.0 {
            let normal = Normal::new(0.0, self.cfg.exploration_sigma).expect("positive sigma");
            for v in &mut a {
                *v += T::of(normal.sample(&mut self.noise_rng));
            }
        }
        Ok(clamp_action(&a, bound))
    }

    /// Temporal-difference targets for a batch.
    fn td_targets(&mut self, batch: &[&Transition<T>]) -> Result<Vec<f64>> {
        let rewards: Vec<f64> = batch.iter().map(|t| t.reward).collect();
        if batch.iter().all(|t| t.done) {
            return Ok(rewards);
        }
        let next = rows(batch.iter().map(|t| t.next_state.as_slice()), self.state_dim)?;
        let mut next_action = self.scaled_actor(&self.actor_target, &next)?;
        let bound = self.action_bound;
        if self.cfg.target_smoothing && self.cfg.target_noise > 0.0 {
            let normal = Normal::new(0.0, self.cfg.target_noise * bound).expect("positive noise");
            let clip = self.cfg.target_noise_clip * bound;
            next_action.mapv_inplace(|v| {
                let eps = normal.sample(&mut self.noise_rng).clamp(-clip, clip);
                T::of((v.as_f64() + eps).clamp(-bound, bound))
            });
        }
        let input = concat(&next, &next_action);
        let mut q_next = vec![f64::INFINITY; batch.len()];
        for c in &self.critics {
            let q = c.target.infer(input.view())?;
            for (m, v) in q_next.iter_mut().zip(q.column(0)) {
                *m = m.min(v.as_f64());
            }
        }
        Ok(batch
            .iter()
            .zip(q_next)
            .map(|(t, q)| t.reward + if t.done { 0.0 } else { self.cfg.discount * q })
            .collect())
    }

    /// Critic regression toward the TD targets; returns the first critic's
    /// mean squared TD error before the step.
    pub fn update_critics(&mut self, batch: &[&Transition<T>]) -> Result<f64> {
        let targets = self.td_targets(batch)?;
        let states = rows(batch.iter().map(|t| t.state.as_slice()), self.state_dim)?;
        let actions = rows(batch.iter().map(|t| t.action.as_slice()), self.action_dim)?;
        let input = concat(&states, &actions);
        let n = batch.len() as f64;
        let mut first_loss = 0.0;
        for (k, c) in self.critics.iter_mut().enumerate() {
            let (q, tape) = c.online.forward(input.view())?;
            let mut loss = 0.0;
            let grad = Array2::from_shape_fn(q.raw_dim(), |(i, _)| {
                let err = q[(i, 0)].as_f64() - targets[i];
                loss += err * err;
                T::of(2.0 * err / n)
            });
            if k == 0 {
                first_loss = loss / n;
            }
            let (g, _) = c.online.backward(&tape, grad.view())?;
            adam_step(&mut c.online, &g, &mut c.opt, 0)?;
        }
        self.stats.critic_updates += 1;
        self.stats.critic_losses.push(first_loss);
        Ok(first_loss)
    }

    /// Deterministic policy gradient step through the first critic.
    pub fn update_actor(&mut self, batch: &[&Transition<T>]) -> Result<f64> {
        let states = rows(batch.iter().map(|t| t.state.as_slice()), self.state_dim)?;
        let b = T::of(self.action_bound);
        let (raw, actor_tape) = self.actor.forward(states.view())?;
        let actions = raw.mapv(|v| v * b);
        let critic = &self.critics[0].online;
        let (q, critic_tape) = critic.forward(concat(&states, &actions).view())?;
        let n = batch.len();
        let loss = -q.column(0).iter().map(|v| v.as_f64()).sum::<f64>() / n as f64;
        let dq = Array2::from_elem(q.raw_dim(), T::of(-1.0 / n as f64));
        let (_, d_input) = critic.backward(&critic_tape, dq.view())?;
        let d_raw = d_input.slice(s![.., self.state_dim..]).mapv(|v| v * b);
        let (g, _) = self.actor.backward(&actor_tape, d_raw.view())?;
        adam_step(&mut self.actor, &g, &mut self.actor_opt, 0)?;
        self.stats.actor_updates += 1;
        self.stats.actor_losses.push(loss);
        Ok(loss)
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = T::of(self.cfg.tau);
        self.actor_target.soft_update_from(&self.actor, tau)?;
        for c in &mut self.critics {
            c.target.soft_update_from(&c.online, tau)?;
        }
        Ok(())
    }

    /// One training update: critics every call, actor and targets every
    /// `policy_delay` critic updates.
    pub fn update(&mut self, batch: &[&Transition<T>]) -> Result<()> {
        self.update_critics(batch)?;
        if self.stats.critic_updates.is_multiple_of(self.cfg.policy_delay) {
            self.update_actor(batch)?;
            self.soft_update_targets()?;
        }
        Ok(())
    }
}

fn rows<'a, T: Real>(it: impl Iterator<Item = &'a [T]>, dim: usize) -> Result<Array2<T>> {
    let mut flat = Vec::new();
    let mut n = 0;
    for r in it {
        if r.len() != dim {
            return Err(Error::invalid(format!("expected vectors of length {dim}, got {}", r.len())));
        }
        flat.extend_from_slice(r);
        n += 1;
    }
    Ok(Array2::from_shape_vec((n, dim), flat).expect("sized above"))
}

fn concat<T: Real>(a: &Array2<T>, b: &Array2<T>) -> Array2<T> {
    ndarray::concatenate(Axis(1), &[a.view(), b.view()]).expect("equal row counts")
}

/// Off-policy training loop over one-step episodes. `cfg.agent` selects TD3
/// or DDPG. One transition is collected per iteration and, once the buffer
/// holds a batch, one update is made.
pub fn train_agent<T: Real, E: LatentEnv<T>>(
    env: &E,
    cfg: &Td3Config,
    action_bound: f64,
    seed: u64,
) -> Result<TrainOutcome<T>> {
    train_agent_observed(env, cfg, action_bound, seed, 0, |_, _| Ok(()))
}

/// [`train_agent`] that also hands the current deterministic policy to
/// `observe` after every `every` iterations (never when `every` is 0).
pub fn train_agent_observed<T: Real, E: LatentEnv<T>>(
    env: &E,
    cfg: &Td3Config,
    action_bound: f64,
    seed: u64,
    every: usize,
    mut observe: impl FnMut(usize, &Policy<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    if env.num_states() == 0 {
        return Err(Error::invalid("training needs at least one stored state"));
    }
    let mut agent = Agent::new(env.state_dim(), env.action_dim(), action_bound, cfg, seed)?;
    let cfg = agent.cfg.clone();
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, seed.wrapping_add(53))?;
    let mut pick = ChaCha8Rng::seed_from_u64(seed.wrapping_add(71));
    let mut curves = Vec::with_capacity(cfg.iterations);
    for iter in 0..cfg.iterations {
        let idx = pick.random_range(0..env.num_states());
        let state = env.state(idx).to_vec();
        let action = agent.explore(&state, iter)?;
        let out = env.step(idx, &action)?;
        curves.push(CurveRow {
            iter,
            reward: out.reward,
            cd_refined: out.cd_refined,
            cd_base: out.cd_base,
            action_norm: out.action_norm,
            improvement: out.cd_base - out.cd_refined,
        });
        buffer.push(Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            done: true,
        });
        if buffer.len() >= cfg.batch_size {
            let batch: Vec<Transition<T>> = buffer.sample(cfg.batch_size)?.into_iter().cloned().collect();
            let refs: Vec<&Transition<T>> = batch.iter().collect();
            agent.update(&refs)?;
        }
        if every > 0 && (iter + 1) % every == 0 {
            observe(iter + 1, &agent.policy())?;
        }
    }
    if !agent.actor.is_finite() {
        return Err(Error::InvalidState("actor parameters diverged".into()));
    }
    Ok(TrainOutcome {
        policy: agent.policy(),
        curves,
        stats: agent.stats,
    })
}

pub fn td3_train<T: Real, E: LatentEnv<T>>(env: &E, cfg: &Td3Config, action_bound: f64, seed: u64) -> Result<TrainOutcome<T>> {
    let cfg = Td3Config {
        agent: AgentKind::Td3,
        ..cfg.clone()
    };
    train_agent(env, &cfg, action_bound, seed)
}

pub fn ddpg_train<T: Real, E: LatentEnv<T>>(env: &E, cfg: &Td3Config, action_bound: f64, seed: u64) -> Result<TrainOutcome<T>> {
    train_agent(env, &cfg.as_ddpg(), action_bound, seed)
}
