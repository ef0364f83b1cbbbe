//! DQN controller: ε-greedy action selection over 13 discrete joint nudges,
//! a FIFO replay buffer, TD targets from a lagged target network and a
//! squared-TD-error training step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{EnvError, Environment};
use crate::kinematics::JOINTS;
use crate::neural::{self, Gradients, Mlp, NeuralError, OptimState};
use crate::seeding::{derive_seed, indexed_seed};

/// No-op plus a positive and a negative nudge per joint.
pub const N_ACTIONS: usize = 2 * JOINTS + 1;
/// Joint angles, sun direction, alignment error, previous action one-hot.
pub const STATE_LEN: usize = JOINTS + 3 + 1 + N_ACTIONS;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("invalid observation: {0}")]
    State(String),
    #[error("action {0} outside 0..{N_ACTIONS}")]
    Action(usize),
    #[error("replay buffer holds {len} transitions, batch needs {batch}")]
    Underfull { len: usize, batch: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Observation fed to the Q-network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    /// Joint angles scaled to `[-1, 1]` across their limits.
    pub joints: [f64; JOINTS],
    /// Estimated sun direction, unit length (ENU).
    pub sun_direction: [f64; 3],
    /// Estimated panel-to-sun angle in radians.
    pub alignment_error: f64,
    pub prev_action: usize,
}

impl AgentState {
    pub fn new(
        joints: [f64; JOINTS],
        sun_direction: [f64; 3],
        alignment_error: f64,
        prev_action: usize,
    ) -> Result<Self, AgentError> {
        if prev_action >= N_ACTIONS {
            return Err(AgentError::Action(prev_action));
        }
        if joints.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(AgentError::State("normalized joints must lie in [-1, 1]".into()));
        }
        let norm = sun_direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(AgentError::State(format!("sun direction norm {norm} is not 1")));
        }
        if !(0.0..=std::f64::consts::PI + 1e-12).contains(&alignment_error) {
            return Err(AgentError::State("alignment error must lie in [0, pi]".into()));
        }
        Ok(Self {
            joints,
            sun_direction,
            alignment_error,
            prev_action,
        })
    }

    /// Network input; the error is scaled by `1/π`.
    pub fn features(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(STATE_LEN);
        x.extend_from_slice(&self.joints);
        x.extend_from_slice(&self.sun_direction);
        x.push(self.alignment_error / std::f64::consts::PI);
        x.extend((0..N_ACTIONS).map(|a| if a == self.prev_action { 1.0 } else { 0.0 }));
        x
    }
}

/// Action `0` is the no-op; `2j + 1` nudges joint `j` up, `2j + 2` down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpace {
    pub delta_rad: f64,
}

impl ActionSpace {
    pub const SIZE: usize = N_ACTIONS;

    /// `(joint, signed increment)`, or `None` for the no-op.
    pub fn joint_step(&self, action: usize) -> Result<Option<(usize, f64)>, AgentError> {
        match action {
            0 => Ok(None),
            a if a < N_ACTIONS => {
                let joint = (a - 1) / 2;
                let sign = if a % 2 == 1 { 1.0 } else { -1.0 };
                Ok(Some((joint, sign * self.delta_rad)))
            }
            a => Err(AgentError::Action(a)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: AgentState,
    pub a: usize,
    pub r: f64,
    pub s_next: AgentState,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        }
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

    /// Transitions pushed over the buffer's lifetime.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform draw with replacement.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<Transition>, AgentError> {
        if batch_size == 0 {
            return Err(AgentError::EmptyBatch);
        }
        if self.items.len() < batch_size {
            return Err(AgentError::Underfull {
                len: self.items.len(),
                batch: batch_size,
            });
        }
        Ok((0..batch_size)
            .map(|_| self.items[rng.random_range(0..self.items.len())])
            .collect())
    }
}

/// Linear ε annealing from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub target_sync_every: u64,
    pub learning_rate: f64,
    pub action_delta_rad: f64,
    pub hidden_sizes: Vec<usize>,
    pub episodes: usize,
    /// Subtracted from the step energy whenever the action is not the no-op.
    pub movement_penalty: f64,
    /// Greedy probe interval in episodes; 0 returns the final network as is.
    pub probe_every: usize,
    /// Fixed-seed greedy episodes averaged per probe.
    pub probe_episodes: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon: EpsilonSchedule {
                start: 1.0,
                end: 0.05,
                decay_steps: 10_000,
            },
            buffer_capacity: 20_000,
            batch_size: 64,
            target_sync_every: 500,
            learning_rate: 1e-3,
            action_delta_rad: 0.05,
            hidden_sizes: vec![64, 64],
            episodes: 300,
            movement_penalty: 0.001,
            probe_every: 10,
            probe_episodes: 3,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma: must lie in [0, 1)");
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return bad("epsilon.start/epsilon.end: must lie in [0, 1]");
        }
        if e.end > e.start {
            return bad("epsilon.end: must not exceed epsilon.start");
        }
        if self.batch_size == 0 {
            return bad("batch_size: must be >= 1");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity: must be >= batch_size");
        }
        if self.target_sync_every == 0 {
            return bad("target_sync_every: must be >= 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate: must be > 0");
        }
        if !(self.action_delta_rad > 0.0) {
            return bad("action_delta_rad: must be > 0");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes: every layer must be >= 1");
        }
        if !(self.movement_penalty >= 0.0) {
            return bad("movement_penalty: must be >= 0");
        }
        if self.probe_every > 0 && self.probe_episodes == 0 {
            return bad("probe_episodes: must be >= 1 when probe_every > 0");
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![STATE_LEN];
        sizes.extend(&self.hidden_sizes);
        sizes.push(N_ACTIONS);
        sizes
    }

    pub fn action_space(&self) -> ActionSpace {
        ActionSpace {
            delta_rad: self.action_delta_rad,
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy: a uniform random action with probability `epsilon`, else the
/// greedy one.
pub fn select_action(
    qnet: &Mlp,
    s: &AgentState,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<usize, AgentError> {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..N_ACTIONS));
    }
    Ok(greedy_action(&qnet.forward(&s.features())?))
}

/// `y = r` for terminal transitions, else `r + γ max_a' Q(s', a'; θ')`.
pub fn td_targets(batch: &[Transition], target_net: &Mlp, gamma: f64) -> Result<Vec<f64>, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    batch
        .iter()
        .map(|t| {
            if t.done {
                Ok(t.r)
            } else {
                let q = target_net.forward(&t.s_next.features())?;
                let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Ok(t.r + gamma * max)
            }
        })
        .collect()
}

/// Mean squared TD error and its gradient; only the taken action's output
/// receives gradient.
pub fn td_loss_and_gradients(
    qnet: &Mlp,
    target_net: &Mlp,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, Gradients), AgentError> {
    let y = td_targets(batch, target_net, gamma)?;
    let n = batch.len() as f64;
    let mut grads = Gradients::zeros_like(qnet);
    let mut loss = 0.0;
    for (t, &yi) in batch.iter().zip(&y) {
        if t.a >= N_ACTIONS {
            return Err(AgentError::Action(t.a));
        }
        let trace = qnet.trace(&t.s.features())?;
        let residual = trace.output()[t.a] - yi;
        loss += residual * residual / n;
        let mut d_out = vec![0.0; N_ACTIONS];
        d_out[t.a] = 2.0 * residual / n;
        qnet.accumulate(&trace, &d_out, &mut grads)?;
    }
    Ok((loss, grads))
}

/// One optimizer step on the squared TD error; returns the pre-step loss.
pub fn train_step(
    qnet: &mut Mlp,
    target_net: &Mlp,
    opt: &mut OptimState,
    batch: &[Transition],
    gamma: f64,
) -> Result<f64, AgentError> {
    let (loss, grads) = td_loss_and_gradients(qnet, target_net, batch, gamma)?;
    neural::step(qnet, &grads, opt)?;
    Ok(loss)
}

/// Hard update: the target becomes a bitwise copy of the online network.
pub fn sync_target(qnet: &Mlp, target_net: &mut Mlp) -> Result<(), AgentError> {
    target_net.copy_from(qnet)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    /// Sum of training rewards (energy minus movement penalties).
    #[serde(rename = "return")]
    pub return_: f64,
    /// Mean true alignment error below 5°.
    pub success: bool,
    pub energy_wh: f64,
    /// Exploration rate at the end of the episode.
    pub epsilon: f64,
}

/// Mean alignment error below which an episode counts as a success.
pub const SUCCESS_ERROR_DEG: f64 = 5.0;

/// Runs one episode with a fixed network; ε = 0 gives the greedy policy.
pub fn run_episode(
    env: &mut impl Environment,
    qnet: &Mlp,
    cfg: &AgentConfig,
    env_seed: u64,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<EpisodeMetrics, AgentError> {
    let space = cfg.action_space();
    let mut s = env.reset(env_seed)?;
    let (mut ret, mut energy, mut err_sum, mut steps) = (0.0, 0.0, 0.0, 0usize);
    loop {
        let a = select_action(qnet, &s, epsilon, rng)?;
        let res = env.step(a, &space)?;
        ret += shaped_reward(res.reward, a, cfg.movement_penalty);
        energy += res.reward;
        err_sum += res.info.alignment_error_rad;
        steps += 1;
        s = res.observation;
        if res.done {
            break;
        }
    }
    Ok(EpisodeMetrics {
        episode: 0,
        return_: ret,
        success: steps > 0 && (err_sum / steps as f64).to_degrees() < SUCCESS_ERROR_DEG,
        energy_wh: energy,
        epsilon,
    })
}

fn shaped_reward(energy: f64, action: usize, penalty: f64) -> f64 {
    if action == 0 {
        energy
    } else {
        energy - penalty
    }
}

/// Standard DQN loop. Episode `i` resets the environment with the `i`-th
/// seed of the `"env"` stream.
///
/// Every `probe_every` episodes the online network plays `probe_episodes`
/// greedy episodes on fixed `"agent-probe"` seeds, and the snapshot with the
/// best mean probe return is returned along with the per-episode metrics.
/// With `probe_every = 0` the final online network is returned.
pub fn run_training(
    env: &mut impl Environment,
    cfg: &AgentConfig,
    seed: u64,
) -> Result<(Mlp, Vec<EpisodeMetrics>), AgentError> {
    cfg.validate()?;
    let space = cfg.action_space();
    let mut qnet = Mlp::new(&cfg.layer_sizes(), derive_seed(seed, "agent-init"))?;
    let mut target = qnet.clone();
    let mut opt = OptimState::adam(cfg.learning_rate, &qnet);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "agent-explore"));
    let env_seed = derive_seed(seed, "env");
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut total_steps: u64 = 0;
    let mut train_steps: u64 = 0;
    let mut metrics = Vec::with_capacity(cfg.episodes);
    let probe_seed = derive_seed(seed, "agent-probe");
    let mut best: Option<(f64, Mlp)> = None;

    for episode in 0..cfg.episodes {
        let mut s = env.reset(indexed_seed(env_seed, episode as u64))?;
        let (mut ret, mut energy, mut err_sum, mut steps) = (0.0, 0.0, 0.0, 0usize);
        loop {
            let eps = cfg.epsilon.value(total_steps);
            let a = select_action(&qnet, &s, eps, &mut rng)?;
            let res = env.step(a, &space)?;
            let r = shaped_reward(res.reward, a, cfg.movement_penalty);
            buffer.push(Transition {
                s,
                a,
                r,
                s_next: res.observation,
                done: res.done,
            });
            ret += r;
            energy += res.reward;
            err_sum += res.info.alignment_error_rad;
            steps += 1;
            total_steps += 1;
            s = res.observation;

            if buffer.len() >= cfg.batch_size {
                let batch = buffer.sample(cfg.batch_size, &mut rng)?;
                train_step(&mut qnet, &target, &mut opt, &batch, cfg.gamma)?;
                train_steps += 1;
                if train_steps % cfg.target_sync_every == 0 {
                    sync_target(&qnet, &mut target)?;
                }
            }
            if res.done {
                break;
            }
        }
        metrics.push(EpisodeMetrics {
            episode,
            return_: ret,
            success: steps > 0 && (err_sum / steps as f64).to_degrees() < SUCCESS_ERROR_DEG,
            energy_wh: energy,
            epsilon: cfg.epsilon.value(total_steps),
        });
        if cfg.probe_every > 0 && (episode + 1) % cfg.probe_every == 0 {
            let mut score = 0.0;
            for k in 0..cfg.probe_episodes {
                score += run_episode(env, &qnet, cfg, indexed_seed(probe_seed, k as u64), 0.0, &mut rng)?.return_;
            }
            score /= cfg.probe_episodes as f64;
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, qnet.clone()));
            }
        }
    }
    Ok((best.map_or(qnet, |(_, net)| net), metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::check_gradients;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn state(seed: u64) -> AgentState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut joints = [0.0; JOINTS];
        for j in &mut joints {
            *j = rng.random_range(-1.0..1.0);
        }
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        AgentState::new(
            joints,
            [v[0] / n, v[1] / n, v[2] / n],
            rng.random_range(0.0..3.0),
            rng.random_range(0..N_ACTIONS),
        )
        .unwrap()
    }

    fn transition(seed: u64, r: f64, done: bool) -> Transition {
        Transition {
            s: state(seed),
            a: (seed as usize) % N_ACTIONS,
            r,
            s_next: state(seed + 1000),
            done,
        }
    }

    /// Network whose output is a constant vector `q` for every input.
    fn constant_net(q: &[f64]) -> Mlp {
        let mut m = Mlp::zeros(&[STATE_LEN, N_ACTIONS]).unwrap();
        let biases_from = STATE_LEN * N_ACTIONS;
        for (k, p) in m.params_mut().enumerate() {
            if k >= biases_from {
                *p = q[k - biases_from];
            }
        }
        m
    }

    #[test]
    fn state_layout_and_validation() {
        let s = state(1);
        let x = s.features();
        assert_eq!(x.len(), STATE_LEN);
        assert_eq!(x[JOINTS + 4 + s.prev_action], 1.0);
        assert_eq!(x[JOINTS + 4..].iter().sum::<f64>(), 1.0);
        assert!(AgentState::new([0.0; JOINTS], [0.0, 0.0, 2.0], 0.0, 0).is_err());
        assert!(AgentState::new([1.5; JOINTS], [0.0, 0.0, 1.0], 0.0, 0).is_err());
        assert!(AgentState::new([0.0; JOINTS], [0.0, 0.0, 1.0], 0.0, 13).is_err());
    }

    #[test]
    fn action_space_layout() {
        let sp = ActionSpace { delta_rad: 0.02 };
        assert_eq!(ActionSpace::SIZE, 13);
        assert_eq!(sp.joint_step(0).unwrap(), None);
        assert_eq!(sp.joint_step(1).unwrap(), Some((0, 0.02)));
        assert_eq!(sp.joint_step(2).unwrap(), Some((0, -0.02)));
        assert_eq!(sp.joint_step(12).unwrap(), Some((5, -0.02)));
        assert!(sp.joint_step(13).is_err());
        assert_eq!(AgentConfig::default().layer_sizes().last(), Some(&13));
    }

    #[test]
    fn select_action_examples() {
        let mut q = vec![0.0; N_ACTIONS];
        q[1] = 5.0;
        q[2] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&constant_net(&q), &state(0), 0.0, &mut rng).unwrap(), 1);
        assert_eq!(select_action(&constant_net(&[3.0; N_ACTIONS]), &state(0), 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let net = constant_net(&[0.0; N_ACTIONS]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 10_000;
        let mut counts = [0usize; N_ACTIONS];
        let s = state(2);
        for _ in 0..draws {
            counts[select_action(&net, &s, 1.0, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / N_ACTIONS as f64;
        let mean = draws as f64 * p;
        let sd = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - mean).abs() <= 3.0 * sd), "{counts:?}");
    }

    #[test]
    fn replay_push_and_evict() {
        let mut buf = ReplayBuffer::new(2);
        buf.push(transition(1, 1.0, false));
        assert_eq!(buf.len(), 1);
        buf.push(transition(2, 2.0, false));
        buf.push(transition(3, 3.0, false));
        assert_eq!(buf.len(), 2);
        let rs: Vec<f64> = buf.iter().map(|t| t.r).collect();
        assert_eq!(rs, vec![2.0, 3.0]);
        assert_eq!(buf.inserted(), 3);
    }

    #[test]
    fn replay_sampling() {
        let mut buf = ReplayBuffer::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(buf.sample(1, &mut rng), Err(AgentError::Underfull { .. })));
        buf.push(transition(1, 7.0, false));
        assert_eq!(buf.sample(1, &mut rng).unwrap()[0].r, 7.0);
        for i in 2..=4 {
            buf.push(transition(i, i as f64, false));
        }
        let a = buf.sample(4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = buf.sample(4, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replay_sampling_is_uniform() {
        // 1e5 draws with p = 0.25: sd of the frequency is 0.00137, so ±0.01
        // is beyond 7 sd.
        let mut buf = ReplayBuffer::new(4);
        for i in 0..4 {
            buf.push(transition(i, i as f64, false));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..25_000 {
            for t in buf.sample(4, &mut rng).unwrap() {
                counts[t.r as usize] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn td_target_examples() {
        let mut q = vec![0.0; N_ACTIONS];
        q[4] = 2.0;
        let target = constant_net(&q);
        let batch = [transition(1, 2.0, true), transition(2, 1.0, false)];
        let y = td_targets(&batch, &target, 0.9).unwrap();
        assert_eq!(y[0], 2.0);
        assert!((y[1] - 2.8).abs() < 1e-12);
        assert_eq!(td_targets(&batch, &target, 0.0).unwrap(), vec![2.0, 1.0]);
        assert!(td_targets(&[], &target, 0.9).is_err());
    }

    #[test]
    fn targets_ignore_online_parameters() {
        let target = Mlp::new(&AgentConfig::default().layer_sizes(), 4).unwrap();
        let batch: Vec<_> = (0..8).map(|i| transition(i, 0.5, i % 3 == 0)).collect();
        let y = td_targets(&batch, &target, 0.95).unwrap();
        let mut online = target.clone();
        for p in online.params_mut() {
            *p += 1.0;
        }
        let (_, _) = td_loss_and_gradients(&online, &target, &batch, 0.95).unwrap();
        assert_eq!(td_targets(&batch, &target, 0.95).unwrap(), y);
    }

    #[test]
    fn train_step_on_fitted_batch_is_stationary() {
        let mut q = vec![0.0; N_ACTIONS];
        q[3] = 1.5;
        let batch: Vec<_> = (0..4)
            .map(|i| Transition {
                a: 3,
                ..transition(i, 1.5, true)
            })
            .collect();
        let mut net = constant_net(&q);
        let before = net.clone();
        let target = net.clone();
        let mut opt = OptimState::sgd(0.1);
        let loss = train_step(&mut net, &target, &mut opt, &batch, 0.9).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn train_step_reduces_loss_on_linear_q() {
        let mut net = Mlp::new(&[STATE_LEN, N_ACTIONS], 2).unwrap();
        let target = Mlp::new(&[STATE_LEN, N_ACTIONS], 3).unwrap();
        let batch = [transition(7, 1.0, false)];
        let mut opt = OptimState::sgd(1e-3);
        let before = train_step(&mut net, &target, &mut opt, &batch, 0.9).unwrap();
        let (after, _) = td_loss_and_gradients(&net, &target, &batch, 0.9).unwrap();
        assert!(after < before);
    }

    #[test]
    fn td_gradient_matches_finite_differences() {
        let sizes = AgentConfig::default().layer_sizes();
        for k in 0..5u64 {
            let net = Mlp::new(&sizes, 100 + k).unwrap();
            let target = Mlp::new(&sizes, 200 + k).unwrap();
            let batch: Vec<_> = (0..16).map(|i| transition(k * 100 + i, 0.3 * i as f64, i % 5 == 0)).collect();
            let (_, g) = td_loss_and_gradients(&net, &target, &batch, 0.95).unwrap();
            let err = check_gradients(
                &net,
                &g,
                |m| td_loss_and_gradients(m, &target, &batch, 0.95).unwrap().0,
                k,
            )
            .unwrap();
            assert!(err < 1e-4, "batch {k}: {err}");
        }
    }

    #[test]
    fn sync_target_copies_exactly() {
        let sizes = AgentConfig::default().layer_sizes();
        let online = Mlp::new(&sizes, 1).unwrap();
        let mut target = Mlp::new(&sizes, 2).unwrap();
        let x = state(5).features();
        assert_ne!(online.forward(&x).unwrap(), target.forward(&x).unwrap());
        sync_target(&online, &mut target).unwrap();
        assert_eq!(online.forward(&x).unwrap(), target.forward(&x).unwrap());
        let once = target.clone();
        sync_target(&online, &mut target).unwrap();
        assert_eq!(target, once);
        let mut wrong = Mlp::new(&[STATE_LEN, 4, N_ACTIONS], 0).unwrap();
        assert!(sync_target(&online, &mut wrong).is_err());
    }

    #[test]
    fn config_validation_names_fields() {
        AgentConfig::default().validate().unwrap();
        let err = AgentConfig { gamma: 1.0, ..Default::default() }.validate().unwrap_err();
        assert!(err.to_string().contains("gamma"));
        let err = AgentConfig { buffer_capacity: 8, ..Default::default() }.validate().unwrap_err();
        assert!(err.to_string().contains("buffer_capacity"));
    }

    proptest! {
        #[test]
        fn epsilon_schedule_is_monotone(start in 0.0..1.0f64, frac in 0.0..1.0f64, decay in 1u64..5000, a in 0u64..10_000, b in 0u64..10_000) {
            let s = EpsilonSchedule { start, end: start * frac, decay_steps: decay };
            prop_assert_eq!(s.value(0), start);
            prop_assert_eq!(s.value(decay), s.end);
            prop_assert_eq!(s.value(decay + a), s.end);
            let (lo, hi) = (a.min(b), a.max(b));
            prop_assert!(s.value(hi) <= s.value(lo));
        }

        #[test]
        fn replay_eviction_is_fifo(cap in 1usize..20, pushes in 0usize..60) {
            let mut buf = ReplayBuffer::new(cap);
            for i in 0..pushes {
                buf.push(transition(i as u64, i as f64, false));
            }
            let kept: Vec<f64> = buf.iter().map(|t| t.r).collect();
            let expected: Vec<f64> = (pushes.saturating_sub(cap)..pushes).map(|i| i as f64).collect();
            prop_assert_eq!(kept, expected);
        }

        #[test]
        fn greedy_selection_is_pure(seed in 0u64..1000) {
            let net = Mlp::new(&AgentConfig::default().layer_sizes(), seed).unwrap();
            let s = state(seed);
            let a = select_action(&net, &s, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            let b = select_action(&net, &s, 0.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
